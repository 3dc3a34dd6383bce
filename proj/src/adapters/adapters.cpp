// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/adapters/adapters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>

#include "semscene/common/error.hpp"
#include "semscene/common/hash.hpp"
#include "semscene/scenekit/io.hpp"

namespace semscene::adapters {

namespace {

constexpr std::array<std::array<float, 3>, 12> kPalette{{
    {0.53f, 0.74f, 0.92f}, {0.35f, 0.55f, 0.25f}, {0.55f, 0.45f, 0.33f}, {0.85f, 0.85f, 0.88f},
    {0.25f, 0.35f, 0.55f}, {0.75f, 0.65f, 0.40f}, {0.45f, 0.30f, 0.25f}, {0.60f, 0.75f, 0.45f},
    {0.40f, 0.40f, 0.42f}, {0.90f, 0.70f, 0.55f}, {0.20f, 0.45f, 0.40f}, {0.70f, 0.40f, 0.50f},
}};

double lattice(std::int64_t i, std::int64_t j, std::uint64_t key) {
    const std::uint64_t h = mix_seed(mix_seed(key, static_cast<std::uint64_t>(i)), static_cast<std::uint64_t>(j));
    return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

std::filesystem::path scratch(const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    return dir / stem;
}

void run(const std::string& command, const std::filesystem::path& in, const std::filesystem::path& out,
         const std::string& extra) {
    std::filesystem::remove(out);
    const std::string line = command + " '" + in.string() + "' '" + out.string() + "'" + extra;
    const int status = std::system(line.c_str());
    if (status != 0 || !std::filesystem::exists(out))
        fail(ErrorKind::kStageFailure, "external adapter failed: " + line);
}

}  // namespace

double value_noise(double u, double v, std::uint64_t key) {
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const auto i = static_cast<std::int64_t>(fu);
    const auto j = static_cast<std::int64_t>(fv);
    const double a = smooth(u - fu);
    const double b = smooth(v - fv);
    const double top = (1 - a) * lattice(i, j, key) + a * lattice(i + 1, j, key);
    const double bottom = (1 - a) * lattice(i, j + 1, key) + a * lattice(i + 1, j + 1, key);
    return (1 - b) * top + b * bottom;
}

ColorImage StubSynthesizer::synthesize(const SemanticMask& mask, std::uint64_t seed) const {
    mask.validate();
    if (mask.has_holes()) fail(ErrorKind::kInvalidArgument, "synthesizer input contains holes");
    std::array<int, kPalette.size()> perm;
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(mix_seed(seed, 0x5EED)));

    const int h = mask.height();
    const int w = mask.width();
    ColorImage raw(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Label k = mask(y, x);
            const auto& base = kPalette[static_cast<std::size_t>(perm[static_cast<std::size_t>(k) % kPalette.size()])];
            for (int c = 0; c < 3; ++c) {
                const std::uint64_t key = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(k)), c);
                const double n = value_noise((x + 0.5) / scale_, (y + 0.5) / scale_, key);
                raw(y, x, c) = static_cast<float>(std::clamp(base[c] + amplitude_ * n, 0.0, 1.0));
            }
        }
    }
    constexpr std::array<float, 3> kTaps{0.25f, 0.5f, 0.25f};
    ColorImage out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                float acc = 0.0f;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        acc += kTaps[dy + 1] * kTaps[dx + 1] *
                               raw(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1), c);
                out(y, x, c) = acc;
            }
    return out;
}

std::pair<double, double> StubDepth::affine() const {
    if (cfg_.fixed_affine) return {cfg_.a, cfg_.b};
    std::mt19937_64 rng(mix_seed(cfg_.seed, 0xAFF1));
    const double a = std::exp(std::uniform_real_distribution<double>(std::log(0.8), std::log(1.25))(rng));
    const double b = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
    return {a, b};
}

DepthMap StubDepth::estimate(const ColorImage& image, const OracleHandle* oracle) const {
    if (!oracle || !oracle->scene) fail(ErrorKind::kUnsupported, "stub depth needs an oracle handle");
    require(image.height() == oracle->camera.height() && image.width() == oracle->camera.width(),
            "image size differs from the oracle camera");
    const DepthMap truth =
        fill_invalid_depth(render_oracle(*oracle->scene, oracle->camera).second, static_cast<float>(cfg_.far_depth));
    const auto [a, b] = affine();
    const std::uint64_t key = mix_seed(cfg_.seed, 0xD397);
    DepthMap out(truth.height(), truth.width());
    for (int y = 0; y < truth.height(); ++y)
        for (int x = 0; x < truth.width(); ++x) {
            const double n = cfg_.noise_level == 0.0 ? 0.0 : value_noise((x + 0.5) / 16.0, (y + 0.5) / 16.0, key);
            const double d = (a * truth.value(y, x) + b) * (1.0 + cfg_.noise_level * n);
            out.set(y, x, static_cast<float>(std::max(d, 1e-3)));
        }
    return out;
}

SemanticMask StubSegmenter::segment(const ColorImage& image, const OracleHandle* oracle) const {
    if (!oracle || !oracle->scene) fail(ErrorKind::kUnsupported, "stub segmenter needs an oracle handle");
    require(image.height() == oracle->camera.height() && image.width() == oracle->camera.width(),
            "image size differs from the oracle camera");
    require(jitter_ >= 0, "segmenter jitter must be non-negative");
    SemanticMask mask = render_oracle(*oracle->scene, oracle->camera).first;
    if (jitter_ == 0) return mask;
    std::mt19937_64 rng(mix_seed(seed_, 0x5E6));
    std::bernoulli_distribution flip(0.5);
    const int h = mask.height();
    const int w = mask.width();
    for (int step = 0; step < jitter_; ++step) {
        SemanticMask next = mask;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::array<Label, 4> other{};
                int n = 0;
                for (auto [dy, dx] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
                    const int yy = y + dy;
                    const int xx = x + dx;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w && mask(yy, xx) != mask(y, x))
                        other[static_cast<std::size_t>(n++)] = mask(yy, xx);
                }
                if (n == 0 || !flip(rng)) continue;
                next(y, x) = other[std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(n) - 1)(rng)];
            }
        mask = std::move(next);
    }
    return mask;
}

ColorImage ExternalSynthesizer::synthesize(const SemanticMask& mask, std::uint64_t seed) const {
    if (mask.has_holes()) fail(ErrorKind::kInvalidArgument, "synthesizer input contains holes");
    const auto in = scratch(workdir_, "synth_request.pgm");
    const auto out = scratch(workdir_, "synth_response.ppm");
    save_mask(in, mask);
    run(command_, in, out, " " + std::to_string(seed));
    ColorImage img = load_image(out);
    if (img.height() != mask.height() || img.width() != mask.width())
        fail(ErrorKind::kStageFailure, "external synthesizer returned a wrong-size image");
    return img;
}

DepthMap ExternalDepth::estimate(const ColorImage& image, const OracleHandle*) const {
    const auto in = scratch(workdir_, "depth_request.ppm");
    const auto out = scratch(workdir_, "depth_response.depth");
    save_image(in, image);
    run(command_, in, out, "");
    DepthMap d = load_depth(out);
    if (d.height() != image.height() || d.width() != image.width() || !d.fully_valid())
        fail(ErrorKind::kStageFailure, "external depth estimator returned an unusable map");
    return d;
}

SemanticMask ExternalSegmenter::segment(const ColorImage& image, const OracleHandle*) const {
    const auto in = scratch(workdir_, "seg_request.ppm");
    const auto out = scratch(workdir_, "seg_response.pgm");
    save_image(in, image);
    run(command_, in, out, "");
    SemanticMask m = load_mask(out, num_classes_);
    if (m.height() != image.height() || m.width() != image.width() || m.has_holes())
        fail(ErrorKind::kStageFailure, "external segmenter returned an unusable mask");
    return m;
}

std::unique_ptr<SynthesizerAdapter> make_synthesizer(const AdapterSpec& spec, double texture_amplitude) {
    if (spec.name == "stub") return std::make_unique<StubSynthesizer>(texture_amplitude);
    if (spec.name == "external" && !spec.command.empty())
        return std::make_unique<ExternalSynthesizer>(spec.command, spec.workdir);
    fail(ErrorKind::kValidation, "unknown synthesizer adapter '" + spec.name + "'");
}

std::unique_ptr<DepthAdapter> make_depth(const AdapterSpec& spec, const StubDepthConfig& stub) {
    if (spec.name == "stub") return std::make_unique<StubDepth>(stub);
    if (spec.name == "external" && !spec.command.empty())
        return std::make_unique<ExternalDepth>(spec.command, spec.workdir);
    fail(ErrorKind::kValidation, "unknown depth adapter '" + spec.name + "'");
}

std::unique_ptr<SegmenterAdapter> make_segmenter(const AdapterSpec& spec, int num_classes, int jitter,
                                                 std::uint64_t seed) {
    if (spec.name == "stub") return std::make_unique<StubSegmenter>(jitter, seed);
    if (spec.name == "external" && !spec.command.empty())
        return std::make_unique<ExternalSegmenter>(spec.command, spec.workdir, num_classes);
    fail(ErrorKind::kValidation, "unknown segmenter adapter '" + spec.name + "'");
}

}  // namespace semscene::adapters
