// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/kernels/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semscene::kernels {

namespace {

constexpr int kLeafSize = 4;

bool slab_test(const Ray& ray, const Eigen::Vector3d& inv_dir, const Eigen::Vector3d& lo,
               const Eigen::Vector3d& hi, double t_max) {
    double t0 = 0.0;
    double t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        double ta = (lo[a] - ray.origin[a]) * inv_dir[a];
        double tb = (hi[a] - ray.origin[a]) * inv_dir[a];
        if (ta > tb) std::swap(ta, tb);
        // NaN (0 * inf) only occurs for rays grazing a slab face; keep the node.
        if (!std::isnan(ta)) t0 = std::max(t0, ta);
        if (!std::isnan(tb)) t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

inline bool closer(double t, std::int32_t id, const RayHit& best) {
    return t < best.t || (t == best.t && id < best.triangle);
}

}  // namespace

bool intersect_triangle(const Ray& ray, const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                        double& t, double& b1, double& b2, double t_min) {
    const Eigen::Vector3d e1 = b - a;
    const Eigen::Vector3d e2 = c - a;
    const Eigen::Vector3d p = ray.dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) return false;
    const double inv_det = 1.0 / det;
    const Eigen::Vector3d s = ray.origin - a;
    const double u = s.dot(p) * inv_det;
    if (u < 0.0 || u > 1.0) return false;
    const Eigen::Vector3d q = s.cross(e1);
    const double v = ray.dir.dot(q) * inv_det;
    if (v < 0.0 || u + v > 1.0) return false;
    const double tt = e2.dot(q) * inv_det;
    if (!(tt > t_min)) return false;
    t = tt;
    b1 = u;
    b2 = v;
    return true;
}

RayHit intersect_bruteforce(const Ray& ray, std::span<const Eigen::Vector3d> verts, std::span<const Triangle> tris) {
    RayHit best;
    for (std::size_t i = 0; i < tris.size(); ++i) {
        const auto& tri = tris[i];
        double t = 0.0;
        double b1 = 0.0;
        double b2 = 0.0;
        const auto id = static_cast<std::int32_t>(i);
        if (intersect_triangle(ray, verts[tri[0]], verts[tri[1]], verts[tri[2]], t, b1, b2) && closer(t, id, best)) {
            best = {true, t, id, b1, b2};
        }
    }
    return best;
}

Bvh::Bvh(std::vector<Eigen::Vector3d> verts, std::vector<Triangle> tris)
    : verts_(std::move(verts)), tris_(std::move(tris)), order_(tris_.size()) {
    std::iota(order_.begin(), order_.end(), 0);
    if (!tris_.empty()) {
        nodes_.reserve(2 * tris_.size() / kLeafSize + 2);
        build(0, static_cast<std::int32_t>(tris_.size()));
    }
}

std::int32_t Bvh::build(std::int32_t first, std::int32_t count) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    Eigen::Vector3d clo = lo;
    Eigen::Vector3d chi = hi;
    for (std::int32_t i = first; i < first + count; ++i) {
        const Triangle& t = tris_[order_[i]];
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) {
            lo = lo.cwiseMin(verts_[t[k]]);
            hi = hi.cwiseMax(verts_[t[k]]);
            centroid += verts_[t[k]] / 3.0;
        }
        clo = clo.cwiseMin(centroid);
        chi = chi.cwiseMax(centroid);
    }
    nodes_[index].lo = lo;
    nodes_[index].hi = hi;
    if (count <= kLeafSize) {
        nodes_[index].left = first;
        nodes_[index].count = count;
        return index;
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const std::int32_t mid = first + count / 2;
    auto key = [&](std::int32_t id) {
        const Triangle& t = tris_[id];
        return verts_[t[0]][axis] + verts_[t[1]][axis] + verts_[t[2]][axis];
    };
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](std::int32_t x, std::int32_t y) { return key(x) < key(y) || (key(x) == key(y) && x < y); });
    const std::int32_t left = build(first, mid - first);
    const std::int32_t right = build(mid, first + count - mid);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

RayHit Bvh::intersect(const Ray& ray) const {
    RayHit best;
    if (nodes_.empty()) return best;
    const Eigen::Vector3d inv_dir = ray.dir.cwiseInverse();
    std::int32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!slab_test(ray, inv_dir, node.lo, node.hi, best.t)) continue;
        if (node.count > 0) {
            for (std::int32_t i = node.left; i < node.left + node.count; ++i) {
                const std::int32_t id = order_[i];
                const Triangle& tri = tris_[id];
                double t = 0.0;
                double b1 = 0.0;
                double b2 = 0.0;
                if (intersect_triangle(ray, verts_[tri[0]], verts_[tri[1]], verts_[tri[2]], t, b1, b2) &&
                    closer(t, id, best)) {
                    best = {true, t, id, b1, b2};
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

std::vector<RayHit> intersect_all(const Bvh& bvh, std::span<const Ray> rays) {
    std::vector<RayHit> hits(rays.size());
    const auto n = static_cast<std::int64_t>(rays.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) hits[static_cast<std::size_t>(i)] = bvh.intersect(rays[static_cast<std::size_t>(i)]);
    return hits;
}

std::vector<RayHit> intersect_all_serial(const Bvh& bvh, std::span<const Ray> rays) {
    std::vector<RayHit> hits(rays.size());
    for (std::size_t i = 0; i < rays.size(); ++i) hits[i] = bvh.intersect(rays[i]);
    return hits;
}

}  // namespace semscene::kernels
