// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "semscene/inpaint/inpainter.hpp"

namespace semscene::pipeline {

struct CorpusConfig {
    int count = 200;
    int resolution = 64;
    int num_classes = 4;
    std::uint64_t seed = 0;
    /// Scenes are cycled; pair i uses scene seed + (i mod scenes).
    int scenes = 20;
    /// Side of the cube the warp-back camera is drawn from.
    double pose_box = 0.5;
    double fov_deg = 60.0;
};

/// Warp-back pairs rendered from oracle scenes seen by jittered cameras.
/// Pairs without any hole are redrawn. Each pair depends only on
/// (seed, index), so the result does not depend on the thread count.
std::vector<inpaint::TrainingPair> make_warpback_corpus(const CorpusConfig& cfg);

}  // namespace semscene::pipeline
