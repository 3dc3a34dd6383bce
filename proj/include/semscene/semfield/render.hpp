// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "semscene/semfield/field.hpp"

namespace semscene::semfield {

/// Constant one-hot sky distribution.
struct SkySemantics {
    int num_classes = 4;
    int sky_class = 0;

    Eigen::VectorXd probabilities() const;
    void validate() const;
};

/// Rays with unit directions and the [near, far] interval sampled on each.
/// An empty interval (near == far) marks a ray that misses the scene box.
struct RayBatch {
    Points origins;
    Points directions;
    Eigen::VectorXd near;
    Eigen::VectorXd far;

    Eigen::Index size() const { return origins.cols(); }
    void validate() const;
    /// Rays through the given pixels, clipped to `bounds`.
    static RayBatch from_pixels(const Camera& cam, const std::vector<std::pair<int, int>>& pixels, const Box& bounds);
    /// All pixels of `cam` in row-major order.
    static RayBatch from_camera(const Camera& cam, const Box& bounds);
};

struct SampleOptions {
    int stratified = 64;
    int importance = 32;
    /// Jittered strata and importance draws; midpoints otherwise.
    bool perturb = false;
    std::uint64_t seed = 0;
    /// Rays per evaluation chunk.
    int chunk = 256;

    int total() const { return stratified + importance; }
    void validate() const;
};

/// Per-ray results; columns are rays.
struct RenderOutput {
    Mat logit_sum;  // sum_i w_i s_i
    Mat p_fg;
    Eigen::VectorXd t_fg;
    Eigen::VectorXd depth;     // ray-length depth sum_i w_i t_i
    Mat y;
    Mat weights;               // samples x rays
    Eigen::VectorXd residual;  // transmittance left after the last sample
};

RenderOutput render_rays(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                         const SampleOptions& opts);
RenderOutput render_rays_serial(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                                const SampleOptions& opts);

/// Forward state kept for the gradient of one batch.
struct RenderTape {
    Mat t;          // sample distances, samples x rays
    Mat delta;
    Mat dsigma_dd;
    Mat dsigma_dbeta;
    Mat transmittance;  // T_i
    FieldEval eval;
    RenderOutput out;
};

/// Single-chunk render that records a tape.
RenderOutput render_with_tape(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                              const SampleOptions& opts, RenderTape& tape);

/// Back-propagates dL/dY, dL/dT_fg (direct) and dL/dD into the field.
void render_backward(SemanticField& field, const SkySemantics& sky, const RenderTape& tape, const Mat& dy,
                     const Eigen::VectorXd& dt_fg, const Eigen::VectorXd& ddepth);

/// Composites per-sample SDF values and logits along sorted samples.
/// Exposed for testing the quadrature in isolation.
RenderOutput composite(const Mat& t, const Mat& delta, const Mat& sigma, const Mat& logits_per_sample,
                       const SkySemantics& sky, Mat* transmittance);

}  // namespace semscene::semfield
