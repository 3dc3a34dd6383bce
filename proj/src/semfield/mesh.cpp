// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/semfield/mesh.hpp"

#include <array>
#include <unordered_map>

#include "semscene/common/error.hpp"

namespace semscene::semfield {

namespace {

// Kuhn split of the unit cube; corner bit 0 = +x, bit 1 = +y, bit 2 = +z.
constexpr std::array<std::array<int, 4>, 6> kTets = {{
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
}};

constexpr Eigen::Index kChunk = 4096;

}  // namespace

TriMesh extract_level_set(const SdfFunction& sdf, int resolution, const Box& bounds) {
    require(resolution >= 8, "mesh grid resolution must be at least 8");
    require((bounds.hi.array() > bounds.lo.array()).all(), "mesh bounds are degenerate");
    const Eigen::Index n = resolution;
    const Eigen::Vector3d cell = bounds.extent() / static_cast<double>(n - 1);
    auto index = [n](Eigen::Index x, Eigen::Index y, Eigen::Index z) { return (z * n + y) * n + x; };
    auto position = [&](Eigen::Index i) {
        const Eigen::Index x = i % n;
        const Eigen::Index y = (i / n) % n;
        const Eigen::Index z = i / (n * n);
        return Eigen::Vector3d(bounds.lo.x() + x * cell.x(), bounds.lo.y() + y * cell.y(), bounds.lo.z() + z * cell.z());
    };

    const Eigen::Index total = n * n * n;
    std::vector<double> values(static_cast<std::size_t>(total));
    const Eigen::Index chunks = (total + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index first = c * kChunk;
        const Eigen::Index count = std::min(kChunk, total - first);
        Points p(3, count);
        for (Eigen::Index i = 0; i < count; ++i) p.col(i) = position(first + i);
        const Eigen::RowVectorXd v = sdf(p);
        for (Eigen::Index i = 0; i < count; ++i) values[static_cast<std::size_t>(first + i)] = v[i];
    }

    TriMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    auto vertex_on_edge = [&](Eigen::Index a, Eigen::Index b) {
        if (a > b) std::swap(a, b);
        const std::uint64_t key = static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(total) +
                                  static_cast<std::uint64_t>(b);
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double fa = values[static_cast<std::size_t>(a)];
        const double fb = values[static_cast<std::size_t>(b)];
        const double t = fa / (fa - fb);
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(position(a) + t * (position(b) - position(a)));
        edge_vertex.emplace(key, id);
        return id;
    };
    auto emit = [&](int a, int b, int c, const Eigen::Vector3d& outward) {
        const Eigen::Vector3d& pa = mesh.vertices[static_cast<std::size_t>(a)];
        const Eigen::Vector3d nrm = (mesh.vertices[static_cast<std::size_t>(b)] - pa)
                                        .cross(mesh.vertices[static_cast<std::size_t>(c)] - pa);
        if (nrm.squaredNorm() <= 1e-30) return;
        if (nrm.dot(outward) < 0.0) std::swap(b, c);
        mesh.triangles.push_back({a, b, c});
    };

    for (Eigen::Index z = 0; z + 1 < n; ++z) {
        for (Eigen::Index y = 0; y + 1 < n; ++y) {
            for (Eigen::Index x = 0; x + 1 < n; ++x) {
                std::array<Eigen::Index, 8> corner;
                for (int k = 0; k < 8; ++k) corner[k] = index(x + (k & 1), y + ((k >> 1) & 1), z + ((k >> 2) & 1));
                for (const auto& tet : kTets) {
                    std::array<Eigen::Index, 4> neg{};
                    std::array<Eigen::Index, 4> pos{};
                    int nn = 0;
                    int np = 0;
                    Eigen::Vector3d cneg = Eigen::Vector3d::Zero();
                    Eigen::Vector3d cpos = Eigen::Vector3d::Zero();
                    for (int v : tet) {
                        const Eigen::Index g = corner[v];
                        if (values[static_cast<std::size_t>(g)] < 0.0) {
                            neg[nn++] = g;
                            cneg += position(g);
                        } else {
                            pos[np++] = g;
                            cpos += position(g);
                        }
                    }
                    if (nn == 0 || np == 0) continue;
                    const Eigen::Vector3d outward = cpos / np - cneg / nn;
                    if (nn == 1 || np == 1) {
                        const bool lone_neg = nn == 1;
                        const Eigen::Index lone = lone_neg ? neg[0] : pos[0];
                        const auto& others = lone_neg ? pos : neg;
                        emit(vertex_on_edge(lone, others[0]), vertex_on_edge(lone, others[1]),
                             vertex_on_edge(lone, others[2]), outward);
                    } else {
                        const int a = vertex_on_edge(neg[0], pos[0]);
                        const int b = vertex_on_edge(neg[0], pos[1]);
                        const int c = vertex_on_edge(neg[1], pos[1]);
                        const int d = vertex_on_edge(neg[1], pos[0]);
                        emit(a, b, c, outward);
                        emit(a, c, d, outward);
                    }
                }
            }
        }
    }
    if (mesh.triangles.empty()) fail(ErrorKind::kEmptyMesh, "the SDF has no zero crossing inside the bounds");
    return mesh;
}

warp::LabeledMesh extract_mesh(const SemanticField& field, int resolution, const Box& bounds) {
    TriMesh tri = extract_level_set([&field](const Points& p) { return field.sdf(p); }, resolution, bounds);
    warp::LabeledMesh mesh;
    mesh.num_classes = field.num_classes();
    mesh.vertices = std::move(tri.vertices);
    mesh.triangles = std::move(tri.triangles);
    mesh.vertex_labels.resize(mesh.vertices.size());
    const auto nv = static_cast<Eigen::Index>(mesh.vertices.size());
    const Eigen::Index chunks = (nv + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index first = c * kChunk;
        const Eigen::Index count = std::min(kChunk, nv - first);
        Points p(3, count);
        for (Eigen::Index i = 0; i < count; ++i) p.col(i) = mesh.vertices[static_cast<std::size_t>(first + i)];
        const std::vector<int> labels = field.labels(p);
        for (Eigen::Index i = 0; i < count; ++i)
            mesh.vertex_labels[static_cast<std::size_t>(first + i)] = labels[static_cast<std::size_t>(i)];
    }
    return mesh;
}

}  // namespace semscene::semfield
