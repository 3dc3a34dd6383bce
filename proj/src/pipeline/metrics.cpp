// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/pipeline/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "semscene/common/error.hpp"
#include "semscene/semfield/losses.hpp"
#include "semscene/warp/warp.hpp"

namespace semscene::pipeline {

namespace {

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorKind::kFormat, "bad number '" + s + "' in " + what);
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kFormat, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) fail(ErrorKind::kStageFailure, "cannot write " + path.string());
}

}  // namespace

std::vector<Camera> sample_cameras(const Box& box, const Eigen::Vector3d& lookat, int n, std::uint64_t seed,
                                   const Intrinsics& k, int height, int width) {
    require(n >= 1, "sample_cameras: n must be at least 1");
    require(box.lo.allFinite() && box.hi.allFinite() && (box.lo.array() <= box.hi.array()).all(),
            "sample_cameras: degenerate box");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Camera> cams;
    cams.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3d eye;
        for (int a = 0; a < 3; ++a) eye[a] = box.lo[a] + unit(rng) * (box.hi[a] - box.lo[a]);
        require((eye - lookat).norm() > 1e-9, "sample_cameras: camera position coincides with the target");
        cams.push_back(Camera::look_at(eye, lookat, Eigen::Vector3d::UnitZ(), k, height, width));
    }
    return cams;
}

void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cameras) {
    std::string text;
    for (const Camera& c : cameras) {
        const Intrinsics& k = c.intrinsics();
        text += std::to_string(c.height()) + " " + std::to_string(c.width());
        for (double v : {k.fx, k.fy, k.cx, k.cy}) text += " " + num(v);
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col) text += " " + num(c.rotation()(r, col));
        for (int a = 0; a < 3; ++a) text += " " + num(c.translation()[a]);
        text += "\n";
    }
    write_file(path, text);
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<Camera> cams;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        int h = 0;
        int w = 0;
        if (!(ls >> h >> w) || h <= 0 || w <= 0) fail(ErrorKind::kFormat, "bad camera size in " + path.string());
        double v[16];
        for (double& x : v) {
            std::string tok;
            if (!(ls >> tok)) fail(ErrorKind::kFormat, "truncated camera line in " + path.string());
            x = parse_double(tok, path.string());
        }
        Intrinsics k{v[0], v[1], v[2], v[3]};
        Eigen::Matrix3d r;
        for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = v[4 + i];
        cams.emplace_back(k, r, Eigen::Vector3d(v[13], v[14], v[15]), h, w);
    }
    return cams;
}

double vsc_score(const std::vector<SemanticMask>& masks, const std::vector<DepthMap>& depths,
                 const std::vector<Camera>& cameras) {
    require(masks.size() >= 2, "vsc_score needs at least two views");
    require(masks.size() == depths.size() && masks.size() == cameras.size(), "vsc_score: mismatched view lists");
    double total = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t j = 0; j < masks.size(); ++j) {
            if (i == j) continue;
            const warp::WarpResult w = warp::warp_partial(masks[i], depths[i], cameras[i], cameras[j]);
            std::size_t covisible = 0;
            std::size_t disagree = 0;
            for (std::size_t p = 0; p < w.mask.pixels(); ++p) {
                if (w.mask[p] == w.mask.hole() || masks[j][p] == masks[j].hole()) continue;
                ++covisible;
                disagree += w.mask[p] != masks[j][p];
            }
            if (covisible == 0) continue;
            total += static_cast<double>(disagree) / static_cast<double>(covisible);
            ++pairs;
        }
    }
    if (pairs == 0) fail(ErrorKind::kUndefinedMetric, "no co-visible pixels between any pair of views");
    return total / pairs;
}

double nll_score(const std::vector<SemanticMask>& rendered, const std::vector<SemanticMask>& reference,
                 double smoothing) {
    require(!rendered.empty() && rendered.size() == reference.size(), "nll_score: mismatched mask lists");
    require(smoothing > 0.0 && smoothing < 1.0, "nll_score: smoothing must lie in (0, 1)");
    const int m = reference[0].num_classes();
    const double hit = -std::log(1.0 - smoothing);
    const double miss = -std::log(smoothing / (m - 1));
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < rendered.size(); ++v) {
        const SemanticMask& r = rendered[v];
        const SemanticMask& g = reference[v];
        require(r.height() == g.height() && r.width() == g.width() && r.num_classes() == m && g.num_classes() == m,
                "nll_score: mask shapes differ");
        require(!r.has_holes() && !g.has_holes(), "nll_score: masks must be hole-free");
        for (std::size_t p = 0; p < r.pixels(); ++p) sum += r[p] == g[p] ? hit : miss;
        count += r.pixels();
    }
    return sum / static_cast<double>(count);
}

double label_accuracy(const SemanticMask& a, const SemanticMask& b) {
    require(a.height() == b.height() && a.width() == b.width() && a.pixels() > 0, "label_accuracy: shapes differ");
    std::size_t same = 0;
    for (std::size_t p = 0; p < a.pixels(); ++p) same += a[p] == b[p];
    return static_cast<double>(same) / static_cast<double>(a.pixels());
}

double aligned_abs_rel(const std::vector<DepthMap>& predicted, const std::vector<DepthMap>& reference) {
    require(predicted.size() == reference.size() && !predicted.empty(), "aligned_abs_rel: mismatched lists");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < predicted.size(); ++v) {
        std::vector<double> d;
        std::vector<double> g;
        for (std::size_t p = 0; p < predicted[v].pixels(); ++p) {
            if (!predicted[v].valid(p) || !reference[v].valid(p)) continue;
            d.push_back(predicted[v].value(p));
            g.push_back(reference[v].value(p));
        }
        if (d.size() < 2) continue;
        const Eigen::Map<const Eigen::VectorXd> dv(d.data(), static_cast<Eigen::Index>(d.size()));
        const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
        const semfield::Alignment al = semfield::align_scale_shift(dv, gv);
        for (std::size_t i = 0; i < d.size(); ++i) sum += std::abs(al.w * d[i] + al.q - g[i]) / g[i];
        count += d.size();
    }
    if (count == 0) fail(ErrorKind::kUndefinedMetric, "no pixels with valid depth in both maps");
    return sum / static_cast<double>(count);
}

void EvalReport::set(const std::string& key, double value) {
    if (!std::isfinite(value)) fail(ErrorKind::kNumeric, "report entry '" + key + "' is not finite");
    values_[key] = value;
}

double EvalReport::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorKind::kInvalidArgument, "report has no entry '" + key + "'");
    return it->second;
}

std::string EvalReport::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + num(v) + "\n";
    return out;
}

EvalReport EvalReport::from_text(const std::string& text) {
    EvalReport r;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) fail(ErrorKind::kFormat, "bad report line '" + line + "'");
        r.set(line.substr(0, eq), parse_double(line.substr(eq + 3), "report"));
    }
    return r;
}

void EvalReport::save(const std::filesystem::path& path) const { write_file(path, to_text()); }

EvalReport EvalReport::load(const std::filesystem::path& path) { return from_text(read_file(path)); }

}  // namespace semscene::pipeline
