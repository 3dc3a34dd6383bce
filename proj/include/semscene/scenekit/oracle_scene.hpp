// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "semscene/scenekit/camera.hpp"
#include "semscene/scenekit/types.hpp"

namespace semscene {

/// Gaussian bump of the heightfield.
struct Bump {
    double cx = 0.0;
    double cy = 0.0;
    double amplitude = 0.0;
    double sigma = 1.0;
};

/// Analytic test scene: a smooth terrain z = h(x, y) over the xy extent of
/// `bounds`, labeled by height bands. Rays that leave the box without touching
/// the terrain see the sky.
class OracleScene {
public:
    OracleScene(std::uint64_t seed, int num_classes, const Box& bounds, double base_height,
                std::vector<Bump> bumps);

    std::uint64_t seed() const { return seed_; }
    int num_classes() const { return num_classes_; }
    Label sky_label() const { return 0; }
    const Box& bounds() const { return bounds_; }
    const std::vector<Bump>& bumps() const { return bumps_; }

    double height(double x, double y) const;
    Eigen::Vector2d height_gradient(double x, double y) const;
    /// Upper bound of |grad h| over the plane.
    double slope_bound() const { return slope_bound_; }
    /// Label of the terrain point above (x, y); never the sky label.
    Label label_at(double x, double y) const;
    bool inside_xy(double x, double y) const;

    /// First terrain intersection as ray parameter t; false if the ray leaves
    /// the box first.
    bool intersect(const Ray& ray, double& t_hit) const;

    /// Value range of h over the box, estimated on a dense grid at build time.
    double min_height() const { return h_min_; }
    double max_height() const { return h_max_; }

private:
    std::uint64_t seed_;
    int num_classes_;
    Box bounds_;
    double base_height_;
    std::vector<Bump> bumps_;
    double slope_bound_ = 0.0;
    double h_min_ = 0.0;
    double h_max_ = 0.0;
};

/// Default oracle box: x, y in [-1.5, 1.5], z in [-0.5, 1.0].
Box default_scene_bounds();

/// Deterministic terrain from `seed`. Throws kInvalidArgument for
/// num_classes < 2.
OracleScene make_oracle_scene(std::uint64_t seed, int num_classes, const Box& bounds);

/// Terrain with no bumps at height `h0`.
OracleScene make_flat_scene(double h0, int num_classes, const Box& bounds);

/// Per-pixel ray cast. Sky pixels get `sky_label()` and invalid depth.
std::pair<SemanticMask, DepthMap> render_oracle(const OracleScene& scene, const Camera& cam);
std::pair<SemanticMask, DepthMap> render_oracle_serial(const OracleScene& scene, const Camera& cam);

/// Fills invalid depth pixels with a fronto-parallel plane at `far_z`.
DepthMap fill_invalid_depth(const DepthMap& depth, float far_z);

}  // namespace semscene
