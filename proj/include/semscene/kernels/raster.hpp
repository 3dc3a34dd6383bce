// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "semscene/common/grid.hpp"

namespace semscene::kernels {

/// Projected vertex: continuous pixel coordinates and camera z.
struct ScreenVertex {
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;
};

using Triangle = std::array<std::int32_t, 3>;

/// Per-pixel result of z-buffered triangle rasterization. `triangle` is -1 for
/// uncovered pixels; `bary` holds perspective-correct barycentrics of the
/// winning triangle (3 channels).
struct RasterBuffers {
    Grid<double> depth;
    Grid<std::int32_t> triangle;
    Grid<double> bary;
};

/// Edge-function fill sampled at pixel centers with an inclusive edge test.
/// Triangles with any vertex at z <= near_z are skipped. Depth ties go to the
/// lower triangle index, so the result does not depend on traversal order.
/// The parallel version splits the image into row bands.
RasterBuffers rasterize(std::span<const ScreenVertex> verts, std::span<const Triangle> tris, int height,
                        int width, double near_z = 1e-6);
RasterBuffers rasterize_serial(std::span<const ScreenVertex> verts, std::span<const Triangle> tris,
                               int height, int width, double near_z = 1e-6);

}  // namespace semscene::kernels
