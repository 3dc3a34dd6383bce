// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/warp/warp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <Eigen/Geometry>

namespace semscene::warp {

namespace {

void check_shapes(const SemanticMask& mask, const DepthMap& depth, const Camera& cam) {
    require(mask.height() == depth.height() && mask.width() == depth.width(), "mask and depth shapes differ");
    require(mask.height() == cam.height() && mask.width() == cam.width(),
            "mask shape does not match the camera resolution");
}

LabeledMesh lift(const SemanticMask& mask, const DepthMap& depth, const Camera& cam) {
    const int h = mask.height();
    const int w = mask.width();
    LabeledMesh mesh;
    mesh.num_classes = mask.num_classes();
    std::vector<std::int32_t> vid(static_cast<std::size_t>(h) * w, -1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.is_hole(y, x) || !depth.valid(y, x)) continue;
            const float z = depth.value(y, x);
            vid[static_cast<std::size_t>(y) * w + x] = static_cast<std::int32_t>(mesh.vertices.size());
            mesh.vertices.push_back(cam.unproject(x + 0.5, y + 0.5, z));
            mesh.vertex_labels.push_back(mask(y, x));
            mesh.vertex_depths.push_back(z);
        }
    }
    auto id = [&](int y, int x) { return vid[static_cast<std::size_t>(y) * w + x]; };
    mesh.triangles.reserve(static_cast<std::size_t>(2) * (h - 1) * (w - 1));
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            const std::int32_t v00 = id(y, x);
            const std::int32_t v01 = id(y, x + 1);
            const std::int32_t v10 = id(y + 1, x);
            const std::int32_t v11 = id(y + 1, x + 1);
            if (v00 >= 0 && v10 >= 0 && v01 >= 0) mesh.triangles.push_back({v00, v10, v01});
            if (v01 >= 0 && v10 >= 0 && v11 >= 0) mesh.triangles.push_back({v01, v10, v11});
        }
    }
    return mesh;
}

bool is_spurious(const LabeledMesh& mesh, const kernels::Triangle& t, double ratio_limit) {
    for (int e = 0; e < 3; ++e) {
        const double a = mesh.vertex_depths[t[e]];
        const double b = mesh.vertex_depths[t[(e + 1) % 3]];
        if (std::max(a, b) / std::min(a, b) > ratio_limit) return true;
    }
    return false;
}

Label pick_label(const LabeledMesh& mesh, const kernels::Triangle& t, const double* bary, LabelRule rule) {
    if (rule == LabelRule::kNearestVertex) {
        int best = 0;
        for (int k = 1; k < 3; ++k) {
            if (bary[k] > bary[best]) best = k;
        }
        return mesh.vertex_labels[t[best]];
    }
    const Label a = mesh.vertex_labels[t[0]];
    const Label b = mesh.vertex_labels[t[1]];
    const Label c = mesh.vertex_labels[t[2]];
    if (a == b || a == c) return a;
    if (b == c) return b;
    return std::min({a, b, c});
}

template <typename RasterFn>
WarpResult rasterize_with(const LabeledMesh& mesh, const Camera& cam, LabelRule rule, RasterFn&& raster) {
    require(!mesh.vertices.empty(), "rasterize_labels: mesh has no vertices");
    std::vector<kernels::ScreenVertex> screen(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Eigen::Vector3d p = cam.project(mesh.vertices[i]);
        screen[i] = {p.x(), p.y(), p.z()};
    }
    const kernels::RasterBuffers buf = raster(screen, mesh.triangles, cam.height(), cam.width());
    WarpResult out{SemanticMask(cam.height(), cam.width(), mesh.num_classes), DepthMap(cam.height(), cam.width())};
    for (int y = 0; y < cam.height(); ++y) {
        for (int x = 0; x < cam.width(); ++x) {
            const std::int32_t tri = buf.triangle(y, x);
            const float z = static_cast<float>(buf.depth(y, x));
            if (tri < 0 || !(z > 0.0f) || !std::isfinite(z)) {
                out.mask(y, x) = out.mask.hole();
                continue;
            }
            const double bary[3] = {buf.bary(y, x, 0), buf.bary(y, x, 1), buf.bary(y, x, 2)};
            out.mask(y, x) = pick_label(mesh, mesh.triangles[tri], bary, rule);
            out.depth.set(y, x, z);
        }
    }
    return out;
}

}  // namespace

void LabeledMesh::validate() const {
    const auto n = static_cast<std::int32_t>(vertices.size());
    if (vertex_labels.size() != vertices.size()) fail(ErrorKind::kValidation, "one label per vertex required");
    if (!vertex_depths.empty() && vertex_depths.size() != vertices.size()) {
        fail(ErrorKind::kValidation, "vertex_depths must be empty or one per vertex");
    }
    for (Label l : vertex_labels) {
        if (l < 0 || l >= num_classes) fail(ErrorKind::kValidation, "vertex label out of range");
    }
    for (const auto& t : triangles) {
        for (std::int32_t i : t) {
            if (i < 0 || i >= n) fail(ErrorKind::kValidation, "triangle index out of range");
        }
        const double area2 = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
        if (!(area2 > 0.0)) fail(ErrorKind::kValidation, "degenerate triangle");
    }
}

LabeledMesh depth_to_mesh(const SemanticMask& mask, const DepthMap& depth, const Camera& cam) {
    check_shapes(mask, depth, cam);
    require(!mask.has_holes(), "depth_to_mesh: mask contains holes");
    require(depth.fully_valid(), "depth_to_mesh: depth has invalid pixels");
    return lift(mask, depth, cam);
}

LabeledMesh depth_to_mesh_partial(const SemanticMask& mask, const DepthMap& depth, const Camera& cam) {
    check_shapes(mask, depth, cam);
    return lift(mask, depth, cam);
}

std::vector<std::int32_t> spurious_triangles(const LabeledMesh& mesh, double rel_threshold) {
    require(rel_threshold > 0.0, "rel_threshold must be positive");
    require(mesh.vertex_depths.size() == mesh.vertices.size(), "pruning needs per-vertex source depths");
    std::vector<std::int32_t> removed;
    const double limit = 1.0 + rel_threshold;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        if (is_spurious(mesh, mesh.triangles[i], limit)) removed.push_back(static_cast<std::int32_t>(i));
    }
    return removed;
}

LabeledMesh prune_spurious_edges(const LabeledMesh& mesh, double rel_threshold) {
    require(rel_threshold > 0.0, "rel_threshold must be positive");
    require(mesh.vertex_depths.size() == mesh.vertices.size(), "pruning needs per-vertex source depths");
    LabeledMesh out;
    out.vertices = mesh.vertices;
    out.vertex_labels = mesh.vertex_labels;
    out.vertex_depths = mesh.vertex_depths;
    out.num_classes = mesh.num_classes;
    const double limit = 1.0 + rel_threshold;
    for (const auto& t : mesh.triangles) {
        if (!is_spurious(mesh, t, limit)) out.triangles.push_back(t);
    }
    return out;
}

WarpResult rasterize_labels(const LabeledMesh& mesh, const Camera& cam, LabelRule rule) {
    return rasterize_with(mesh, cam, rule, [](auto&&... a) { return kernels::rasterize(a...); });
}

WarpResult rasterize_labels_serial(const LabeledMesh& mesh, const Camera& cam, LabelRule rule) {
    return rasterize_with(mesh, cam, rule, [](auto&&... a) { return kernels::rasterize_serial(a...); });
}

WarpResult warp_mask(const SemanticMask& mask, const DepthMap& depth, const Camera& src, const Camera& dst,
                     double rel_threshold, LabelRule rule) {
    return rasterize_labels(prune_spurious_edges(depth_to_mesh(mask, depth, src), rel_threshold), dst, rule);
}

WarpResult warp_partial(const SemanticMask& mask, const DepthMap& depth, const Camera& src, const Camera& dst,
                        double rel_threshold, LabelRule rule) {
    LabeledMesh mesh = depth_to_mesh_partial(mask, depth, src);
    if (mesh.vertices.empty()) {
        SemanticMask holes(dst.height(), dst.width(), mask.num_classes(), mask.num_classes());
        return {std::move(holes), DepthMap(dst.height(), dst.width())};
    }
    return rasterize_labels(prune_spurious_edges(mesh, rel_threshold), dst, rule);
}

PoseSampler identity_pose_sampler() {
    return [](const Camera& src, std::mt19937_64&) { return src; };
}

PoseSampler box_pose_sampler(const Eigen::Vector3d& half_extent, const Eigen::Vector3d& target) {
    require((half_extent.array() >= 0.0).all(), "pose box half extent must be non-negative");
    return [half_extent, target](const Camera& src, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        Eigen::Vector3d offset;
        for (int a = 0; a < 3; ++a) offset[a] = half_extent[a] * unit(rng);
        return Camera::look_at(src.center() + offset, target, Eigen::Vector3d::UnitZ(), src.intrinsics(),
                               src.height(), src.width());
    };
}

WarpbackPair warpback_pair(const SemanticMask& mask, const DepthMap& depth, const Camera& src,
                           const PoseSampler& pose_sampler, std::uint64_t seed, double rel_threshold) {
    require(!mask.has_holes(), "warpback_pair: source mask must be hole-free");
    std::mt19937_64 rng(seed);
    const Camera dst = pose_sampler(src, rng);
    const WarpResult there = warp_mask(mask, depth, src, dst, rel_threshold);
    WarpResult back = warp_partial(there.mask, there.depth, dst, src, rel_threshold);
    return {std::move(back.mask), mask};
}

namespace {

constexpr char kMeshMagic[4] = {'S', 'M', 'S', 'H'};
constexpr std::uint32_t kMeshVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    static_assert(std::endian::native == std::endian::little, "mesh blobs are little-endian");
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) fail(ErrorKind::kFormat, "truncated mesh file");
    return v;
}

}  // namespace

void save_mesh(const std::filesystem::path& path, const LabeledMesh& mesh) {
    mesh.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::kInvalidArgument, "cannot write " + path.string());
    out.write(kMeshMagic, 4);
    put<std::uint32_t>(out, kMeshVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.num_classes));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.vertices.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.triangles.size()));
    for (const auto& v : mesh.vertices) {
        for (int k = 0; k < 3; ++k) put<float>(out, static_cast<float>(v[k]));
    }
    for (Label l : mesh.vertex_labels) put<std::int32_t>(out, l);
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) put<std::uint32_t>(out, static_cast<std::uint32_t>(t[k]));
    }
}

LabeledMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kInvalidArgument, "cannot read " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMeshMagic, 4) != 0) fail(ErrorKind::kFormat, "bad mesh magic in " + path.string());
    if (get<std::uint32_t>(in) != kMeshVersion) fail(ErrorKind::kFormat, "unsupported mesh version");
    LabeledMesh mesh;
    mesh.num_classes = static_cast<int>(get<std::uint32_t>(in));
    const auto nv = get<std::uint32_t>(in);
    const auto nt = get<std::uint32_t>(in);
    mesh.vertices.resize(nv);
    for (auto& v : mesh.vertices) {
        for (int k = 0; k < 3; ++k) v[k] = get<float>(in);
    }
    mesh.vertex_labels.resize(nv);
    for (auto& l : mesh.vertex_labels) l = get<std::int32_t>(in);
    mesh.triangles.resize(nt);
    for (auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) t[k] = static_cast<std::int32_t>(get<std::uint32_t>(in));
    }
    mesh.validate();
    return mesh;
}

}  // namespace semscene::warp
