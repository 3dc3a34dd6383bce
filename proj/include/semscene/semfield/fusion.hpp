// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "semscene/scenekit/types.hpp"
#include "semscene/semfield/field.hpp"
#include "semscene/semfield/losses.hpp"
#include "semscene/semfield/render.hpp"

namespace semscene::semfield {

/// One supervising view: hole-free mask, reference depth (affine-ambiguous,
/// may be partially invalid) and the source depth warped into this view.
struct FusionView {
    Camera camera;
    SemanticMask mask;
    DepthMap depth;
    DepthMap src_depth;
};

struct FusionConfig {
    FieldConfig field;
    LossWeights weights;
    SampleOptions sampling{48, 16, true, 0, 256};
    int rays_per_iteration = 256;
    int iterations = 3000;
    double learning_rate = 5e-4;
    /// Learning rate decays exponentially to this fraction at the last step.
    double final_lr_fraction = 1.0;
    std::uint64_t seed = 0;
    int eikonal_points = 256;
    int rank_pairs = 128;
    /// Steps fitting the SDF to a horizontal plane before training.
    int init_iterations = 1000;
    double init_height = 0.0;
    int sky_class = 0;
    int log_every = 50;

    void validate() const;
};

struct FusionLog {
    std::vector<double> losses;  // mean total loss per logging window
    std::vector<LossComponents> components;
};

/// Each iteration renders rays of one randomly chosen view, so the depth
/// alignment and ranking pairs stay within a single view.
SemanticField train_semantic_field(const std::vector<FusionView>& views, const FusionConfig& cfg,
                                   FusionLog* log = nullptr, const SemanticField* init = nullptr);

/// Argmax of Y per pixel; z-depth where T_fg > 0.5, invalid elsewhere.
std::vector<std::pair<SemanticMask, DepthMap>> render_semantic_views(const SemanticField& field,
                                                                     const std::vector<Camera>& cameras,
                                                                     const SkySemantics& sky,
                                                                     const SampleOptions& opts);

}  // namespace semscene::semfield
