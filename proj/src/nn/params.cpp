// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/nn/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "semscene/common/error.hpp"

namespace semscene::nn {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    static_assert(std::endian::native == std::endian::little, "checkpoints are little-endian");
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) fail(ErrorKind::kFormat, "truncated checkpoint");
    return v;
}

}  // namespace

int ParamStore::add(const std::string& name, std::vector<int> shape) {
    require(find(name) < 0, "duplicate parameter name " + name);
    std::size_t n = 1;
    for (int d : shape) {
        require(d > 0, "parameter dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    tensors_.push_back({name, std::move(shape), AlignedVector(n, 0.0), AlignedVector(n, 0.0)});
    return static_cast<int>(tensors_.size() - 1);
}

int ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& t : tensors_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

std::vector<double> ParamStore::flat_values() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& t : tensors_) out.insert(out.end(), t.value.begin(), t.value.end());
    return out;
}

void ParamStore::set_flat_values(const std::vector<double>& flat) {
    require(flat.size() == parameter_count(), "flat parameter size mismatch");
    std::size_t k = 0;
    for (auto& t : tensors_) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(k), flat.begin() + static_cast<std::ptrdiff_t>(k + t.size()),
                  t.value.begin());
        k += t.size();
    }
}

std::vector<double> ParamStore::flat_grads() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& t : tensors_) out.insert(out.end(), t.grad.begin(), t.grad.end());
    return out;
}

bool ParamStore::same_values(const ParamStore& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        const auto& a = tensors_[i];
        const auto& b = other.tensors_[i];
        if (a.name != b.name || a.shape != b.shape || a.value != b.value) return false;
    }
    return true;
}

void init_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.value) v = u(rng);
}

void init_normal(Tensor& t, double mean, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> n(mean, stddev);
    for (double& v : t.value) v = n(rng);
}

Adam::Adam(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& t : params.tensors()) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

void Adam::step(ParamStore& params) {
    require(params.tensors().size() == m_.size(), "optimizer/parameter mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        Tensor& p = params[static_cast<int>(i)];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double g = p.grad[k];
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
            if (cfg_.lr != 0.0) p.value[k] -= cfg_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
        }
    }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::kInvalidArgument, "cannot write " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(params.tensors().size()));
    for (const auto& t : params.tensors()) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (const auto& t : params.tensors()) {
        for (double v : t.value) {
            const float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!out) fail(ErrorKind::kInvalidArgument, "write failed for " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kInvalidArgument, "cannot read " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::kFormat, "bad checkpoint magic in " + path.string());
    const std::uint32_t version = get_u32(in);
    if (version != kVersion) fail(ErrorKind::kFormat, "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = get_u32(in);
    if (count > 100000) fail(ErrorKind::kFormat, "implausible tensor count");
    ParamStore params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = get_u32(in);
        if (len > 4096) fail(ErrorKind::kFormat, "implausible tensor name length");
        std::string name(len, '\0');
        in.read(name.data(), len);
        const std::uint32_t rank = get_u32(in);
        if (rank > 8) fail(ErrorKind::kFormat, "implausible tensor rank");
        std::vector<int> shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(get_u32(in)));
        params.add(name, shape);
    }
    for (auto& t : params.tensors()) {
        for (double& v : t.value) {
            float f = 0.0f;
            in.read(reinterpret_cast<char*>(&f), 4);
            v = f;
        }
    }
    if (!in) fail(ErrorKind::kFormat, "truncated checkpoint weights in " + path.string());
    return params;
}

void round_to_float(ParamStore& params) {
    for (auto& t : params.tensors()) {
        for (double& v : t.value) v = static_cast<float>(v);
    }
}

}  // namespace semscene::nn
