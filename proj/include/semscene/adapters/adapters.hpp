// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "semscene/scenekit/camera.hpp"
#include "semscene/scenekit/oracle_scene.hpp"
#include "semscene/scenekit/types.hpp"

namespace semscene::adapters {

/// Ground truth the toy estimators are allowed to peek at: the scene and the
/// camera that produced the image.
struct OracleHandle {
    const OracleScene* scene = nullptr;
    Camera camera;
};

/// Semantic mask + style seed to a color image.
class SynthesizerAdapter {
public:
    virtual ~SynthesizerAdapter() = default;
    virtual ColorImage synthesize(const SemanticMask& mask, std::uint64_t seed) const = 0;
    virtual std::string name() const = 0;
};

/// Color image to a fully valid, positive depth map.
class DepthAdapter {
public:
    virtual ~DepthAdapter() = default;
    virtual DepthMap estimate(const ColorImage& image, const OracleHandle* oracle) const = 0;
    virtual std::string name() const = 0;
};

/// Color image to a hole-free semantic mask.
class SegmenterAdapter {
public:
    virtual ~SegmenterAdapter() = default;
    virtual SemanticMask segment(const ColorImage& image, const OracleHandle* oracle) const = 0;
    virtual std::string name() const = 0;
};

/// Smooth value noise in [-1, 1] on a unit lattice, keyed by `key`.
double value_noise(double u, double v, std::uint64_t key);

/// Per-class palette color (permuted by the seed) plus value-noise texture in
/// pixel coordinates, followed by a 3x3 binomial blur.
class StubSynthesizer final : public SynthesizerAdapter {
public:
    static constexpr int kKernelRadius = 1;
    explicit StubSynthesizer(double texture_amplitude = 0.1, double texture_scale = 8.0)
        : amplitude_(texture_amplitude), scale_(texture_scale) {}
    ColorImage synthesize(const SemanticMask& mask, std::uint64_t seed) const override;
    std::string name() const override { return "stub"; }

private:
    double amplitude_;
    double scale_;
};

struct StubDepthConfig {
    double noise_level = 0.05;
    std::uint64_t seed = 0;
    /// When false, the global affine is drawn from the seed; otherwise (a, b) is used.
    bool fixed_affine = false;
    double a = 1.0;
    double b = 0.0;
    /// Depth written where the oracle sees sky.
    double far_depth = 4.0;
};

/// Oracle z-depth under a random global affine a*D + b (a in [0.8, 1.25],
/// b in [-0.1, 0.1]) times (1 + noise_level * n) with smooth noise n in [-1, 1].
class StubDepth final : public DepthAdapter {
public:
    explicit StubDepth(StubDepthConfig cfg = {}) : cfg_(cfg) {}
    DepthMap estimate(const ColorImage& image, const OracleHandle* oracle) const override;
    std::string name() const override { return "stub"; }
    /// The affine actually applied for this configuration.
    std::pair<double, double> affine() const;

private:
    StubDepthConfig cfg_;
};

/// Oracle labels with optional boundary jitter: for each of `jitter` rounds,
/// every pixel with a differently labelled 4-neighbor takes one such
/// neighbor's label (chosen at random) with probability 1/2, i.e. a random
/// class grows by one pixel there.
class StubSegmenter final : public SegmenterAdapter {
public:
    explicit StubSegmenter(int jitter = 0, std::uint64_t seed = 0) : jitter_(jitter), seed_(seed) {}
    SemanticMask segment(const ColorImage& image, const OracleHandle* oracle) const override;
    std::string name() const override { return "stub"; }

private:
    int jitter_;
    std::uint64_t seed_;
};

// External adapters run `<command> <input> <output> [seed]` through the shell
// and read the output file back. Masks travel as PGM, images as PPM, depth
// as the binary depth format of scenekit. A non-zero exit status or missing
// output is a stage failure.

class ExternalSynthesizer final : public SynthesizerAdapter {
public:
    ExternalSynthesizer(std::string command, std::filesystem::path workdir)
        : command_(std::move(command)), workdir_(std::move(workdir)) {}
    ColorImage synthesize(const SemanticMask& mask, std::uint64_t seed) const override;
    std::string name() const override { return "external"; }

private:
    std::string command_;
    std::filesystem::path workdir_;
};

class ExternalDepth final : public DepthAdapter {
public:
    ExternalDepth(std::string command, std::filesystem::path workdir)
        : command_(std::move(command)), workdir_(std::move(workdir)) {}
    DepthMap estimate(const ColorImage& image, const OracleHandle* oracle) const override;
    std::string name() const override { return "external"; }

private:
    std::string command_;
    std::filesystem::path workdir_;
};

class ExternalSegmenter final : public SegmenterAdapter {
public:
    ExternalSegmenter(std::string command, std::filesystem::path workdir, int num_classes)
        : command_(std::move(command)), workdir_(std::move(workdir)), num_classes_(num_classes) {}
    SemanticMask segment(const ColorImage& image, const OracleHandle* oracle) const override;
    std::string name() const override { return "external"; }

private:
    std::string command_;
    std::filesystem::path workdir_;
    int num_classes_;
};

/// Selection by name: "stub" or "external" (which needs `command`).
struct AdapterSpec {
    std::string name = "stub";
    std::string command;
    std::filesystem::path workdir = ".";
};

std::unique_ptr<SynthesizerAdapter> make_synthesizer(const AdapterSpec& spec, double texture_amplitude = 0.1);
std::unique_ptr<DepthAdapter> make_depth(const AdapterSpec& spec, const StubDepthConfig& stub = {});
std::unique_ptr<SegmenterAdapter> make_segmenter(const AdapterSpec& spec, int num_classes, int jitter = 0,
                                                 std::uint64_t seed = 0);

}  // namespace semscene::adapters
