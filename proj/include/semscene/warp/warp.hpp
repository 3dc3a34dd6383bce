// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "semscene/kernels/raster.hpp"
#include "semscene/scenekit/camera.hpp"
#include "semscene/scenekit/types.hpp"

namespace semscene::warp {

/// Triangle mesh whose vertices carry semantic labels. `vertex_depths` holds
/// the source-camera depth of each vertex for meshes lifted from a depth map
/// and is empty for meshes from other sources (e.g. level-set extraction).
struct LabeledMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<kernels::Triangle> triangles;
    std::vector<Label> vertex_labels;
    std::vector<float> vertex_depths;
    int num_classes = 0;

    /// Index bounds, label range and non-degeneracy; throws kValidation.
    void validate() const;
};

/// Mask and depth seen from a target camera. HOLE pixels in `mask` are exactly
/// the invalid pixels of `depth`.
struct WarpResult {
    SemanticMask mask;
    DepthMap depth;
};

/// How a covered pixel picks its label from the winning triangle.
enum class LabelRule {
    /// Label of the vertex with the largest barycentric weight. Exact when a
    /// pixel center lands on a vertex, which is what a same-camera warp does.
    kNearestVertex,
    /// Majority of the three vertex labels; ties go to the lowest label.
    kMajorityVote,
};

inline constexpr double kDefaultRelThreshold = 0.1;

/// One vertex per pixel (unprojected at the pixel center), two triangles per
/// pixel quad. Requires a hole-free mask and a fully valid depth map.
LabeledMesh depth_to_mesh(const SemanticMask& mask, const DepthMap& depth, const Camera& cam);

/// Like depth_to_mesh, but HOLE / invalid pixels produce no vertex and every
/// quad triangle touching one is dropped. Used to warp already-warped masks.
LabeledMesh depth_to_mesh_partial(const SemanticMask& mask, const DepthMap& depth, const Camera& cam);

/// Drops every triangle with an edge whose endpoint depth ratio exceeds
/// 1 + rel_threshold. Vertices are kept.
LabeledMesh prune_spurious_edges(const LabeledMesh& mesh, double rel_threshold);

/// Indices of the triangles prune_spurious_edges would remove.
std::vector<std::int32_t> spurious_triangles(const LabeledMesh& mesh, double rel_threshold);

/// Z-buffered label rendering of the mesh into `cam`.
WarpResult rasterize_labels(const LabeledMesh& mesh, const Camera& cam,
                            LabelRule rule = LabelRule::kNearestVertex);
WarpResult rasterize_labels_serial(const LabeledMesh& mesh, const Camera& cam,
                                   LabelRule rule = LabelRule::kNearestVertex);

/// depth_to_mesh -> prune_spurious_edges -> rasterize_labels.
WarpResult warp_mask(const SemanticMask& mask, const DepthMap& depth, const Camera& src, const Camera& dst,
                     double rel_threshold = kDefaultRelThreshold, LabelRule rule = LabelRule::kNearestVertex);

/// Same pipeline for inputs that already contain holes.
WarpResult warp_partial(const SemanticMask& mask, const DepthMap& depth, const Camera& src, const Camera& dst,
                        double rel_threshold = kDefaultRelThreshold, LabelRule rule = LabelRule::kNearestVertex);

/// Draws a target camera for warp-back corruption given the source camera.
using PoseSampler = std::function<Camera(const Camera& src, std::mt19937_64& rng)>;

/// Returns the source camera unchanged.
PoseSampler identity_pose_sampler();
/// Offsets the source camera center uniformly in [-half, half] per axis and
/// re-aims it at `target` (world up +z).
PoseSampler box_pose_sampler(const Eigen::Vector3d& half_extent, const Eigen::Vector3d& target);

struct WarpbackPair {
    SemanticMask corrupted;
    SemanticMask target;
};

/// Warps the mask to a sampled view and back again. The result keeps HOLE
/// wherever the round trip exposed a disocclusion.
WarpbackPair warpback_pair(const SemanticMask& mask, const DepthMap& depth, const Camera& src,
                           const PoseSampler& pose_sampler, std::uint64_t seed,
                           double rel_threshold = kDefaultRelThreshold);

/// Binary mesh blob: magic "SMSH", uint32 version, uint32 num_classes,
/// uint32 nV, uint32 nT, then nV float32 xyz, nV int32 labels, nT uint32 triples.
void save_mesh(const std::filesystem::path& path, const LabeledMesh& mesh);
LabeledMesh load_mesh(const std::filesystem::path& path);

}  // namespace semscene::warp
