// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "semscene/nn/layers.hpp"
#include "semscene/scenekit/types.hpp"

namespace semscene::inpaint {

struct InpaintConfig {
    int resolution = 64;
    int batch_size = 8;
    int iterations = 2000;
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;
    /// Channel widths of the three encoder levels.
    std::array<int, 3> widths = {16, 24, 32};
    /// Mean training loss is recorded every `log_every` iterations.
    int log_every = 50;

    void validate() const;
};

/// Corrupted mask (with HOLE) and the original it should be restored to.
struct TrainingPair {
    SemanticMask corrupted;
    SemanticMask target;
};

/// Three-level encoder-decoder with skip connections. Input: one-hot labels
/// plus a hole indicator channel; output: per-pixel class logits.
class Inpainter {
public:
    Inpainter(int num_classes, const std::array<int, 3>& widths, std::uint64_t seed);

    static Inpainter load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    int num_classes() const { return num_classes_; }
    const nn::ParamStore& params() const { return params_; }
    nn::ParamStore& params() { return params_; }

    /// Network input for a batch of masks (all the same shape, side
    /// divisible by 4).
    nn::FeatureMap encode(const std::vector<const SemanticMask*>& masks) const;

    struct Cache;
    /// Logits (N x M_s x H x W). When `cache` is non-null it keeps what
    /// backward() needs.
    nn::FeatureMap forward(const nn::FeatureMap& input, Cache* cache) const;
    /// Accumulates parameter gradients for dL/dlogits.
    void backward(const Cache& cache, const nn::FeatureMap& dlogits);

private:
    Inpainter() = default;
    void build(std::uint64_t seed);

    int num_classes_ = 0;
    std::array<int, 3> widths_{};
    nn::ParamStore params_;
    std::vector<nn::Conv2d> convs_;
};

struct Inpainter::Cache {
    std::vector<nn::FeatureMap> pre;   // conv outputs before activation
    std::vector<nn::FeatureMap> post;  // inputs to each conv
};

/// Fills holes with the argmax of the logits; known pixels are kept. Masks whose
/// sides are not multiples of 4 are resampled (nearest) for the network and back.
SemanticMask inpaint(const Inpainter& model, const SemanticMask& mask);

/// Mean per-pixel cross-entropy of `logits` (1 x M_s x H x W or N x ...)
/// against hole-free targets. Writes dL/dlogits into `grad` if non-null.
double inpaint_loss(const nn::FeatureMap& logits, const std::vector<const SemanticMask*>& targets,
                    nn::FeatureMap* grad);
double inpaint_loss(const nn::FeatureMap& logits, const SemanticMask& target, nn::FeatureMap* grad);

struct TrainLog {
    std::vector<double> checkpoint_losses;  // mean loss per logging window
};

/// Adam on random mini-batches drawn from `pairs`. Deterministic for a fixed
/// seed. Throws kInvalidArgument on an empty corpus or mixed class counts.
Inpainter train_inpainter(const std::vector<TrainingPair>& pairs, const InpaintConfig& cfg,
                          TrainLog* log = nullptr, const Inpainter* init = nullptr);

/// Fraction of HOLE pixels in `corrupted` whose inpainted label equals `target`.
double hole_accuracy(const Inpainter& model, const std::vector<TrainingPair>& pairs);

/// Nearest-neighbour resize of a label image.
SemanticMask resize_nearest(const SemanticMask& mask, int height, int width);

}  // namespace semscene::inpaint
