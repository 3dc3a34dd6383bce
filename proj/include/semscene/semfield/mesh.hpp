// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "semscene/semfield/field.hpp"
#include "semscene/warp/warp.hpp"

namespace semscene::semfield {

/// Batched signed distance: 3 x N points to 1 x N values.
using SdfFunction = std::function<Eigen::RowVectorXd(const Points&)>;

struct TriMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<kernels::Triangle> triangles;
};

/// Zero level set of `sdf` sampled on a resolution^3 lattice spanning
/// `bounds`, polygonized by marching tetrahedra (six per cell). Triangles face
/// increasing SDF. Throws kEmptyMesh when no cell changes sign.
TriMesh extract_level_set(const SdfFunction& sdf, int resolution, const Box& bounds);

/// Level set of the field with each vertex labelled by its semantic argmax.
warp::LabeledMesh extract_mesh(const SemanticField& field, int resolution, const Box& bounds);

}  // namespace semscene::semfield
