// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semscene/kernels/raster.hpp"
#include "semscene/scenekit/camera.hpp"

namespace semscene::kernels {

struct RayHit {
    bool hit = false;
    double t = std::numeric_limits<double>::infinity();
    std::int32_t triangle = -1;
    double b1 = 0.0;  // barycentric weight of vertex 1
    double b2 = 0.0;  // barycentric weight of vertex 2
};

/// Moller-Trumbore ray/triangle test; two-sided, t > t_min.
bool intersect_triangle(const Ray& ray, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                        const Eigen::Vector3d& c, double& t, double& b1, double& b2, double t_min = 1e-9);

/// Nearest hit by scanning every triangle. Ties in t go to the lower index.
RayHit intersect_bruteforce(const Ray& ray, std::span<const Eigen::Vector3d> verts,
                            std::span<const Triangle> tris);

/// Binary bounding-volume hierarchy over a triangle soup (median split on the
/// longest centroid axis). Returns exactly what the brute-force scan returns.
class Bvh {
public:
    Bvh(std::vector<Eigen::Vector3d> verts, std::vector<Triangle> tris);

    RayHit intersect(const Ray& ray) const;
    std::size_t triangle_count() const { return tris_.size(); }

private:
    struct Node {
        Eigen::Vector3d lo;
        Eigen::Vector3d hi;
        std::int32_t left = -1;  // child index, or first primitive for leaves
        std::int32_t right = -1;
        std::int32_t count = 0;  // > 0 for leaves
    };

    std::int32_t build(std::int32_t first, std::int32_t count);

    std::vector<Eigen::Vector3d> verts_;
    std::vector<Triangle> tris_;
    std::vector<std::int32_t> order_;
    std::vector<Node> nodes_;
};

std::vector<RayHit> intersect_all(const Bvh& bvh, std::span<const Ray> rays);
std::vector<RayHit> intersect_all_serial(const Bvh& bvh, std::span<const Ray> rays);

}  // namespace semscene::kernels
