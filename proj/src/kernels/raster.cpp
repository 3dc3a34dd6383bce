// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/kernels/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace semscene::kernels {

namespace {

// Barycentric slack for pixel centers sitting exactly on an edge; absorbs the
// round-off of an unproject/project round trip.
constexpr double kEdgeSlack = 1e-7;

RasterBuffers make_buffers(int height, int width) {
    return {Grid<double>(height, width, 1, std::numeric_limits<double>::infinity()),
            Grid<std::int32_t>(height, width, 1, -1), Grid<double>(height, width, 3, 0.0)};
}

inline double edge(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

void raster_triangle(std::int32_t id, const ScreenVertex& a, const ScreenVertex& b, const ScreenVertex& c,
                     int row_begin, int row_end, double near_z, RasterBuffers& out) {
    if (a.z <= near_z || b.z <= near_z || c.z <= near_z) return;
    const double area = edge(a.u, a.v, b.u, b.v, c.u, c.v);
    if (!(std::abs(area) > 1e-12) || !std::isfinite(area)) return;
    const int width = out.depth.width();
    const double pad = 1e-6;
    const double min_u = std::min({a.u, b.u, c.u});
    const double max_u = std::max({a.u, b.u, c.u});
    const double min_v = std::min({a.v, b.v, c.v});
    const double max_v = std::max({a.v, b.v, c.v});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_u - 0.5 - pad)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(max_u - 0.5 + pad)));
    const int y0 = std::max(row_begin, static_cast<int>(std::ceil(min_v - 0.5 - pad)));
    const int y1 = std::min(row_end - 1, static_cast<int>(std::floor(max_v - 0.5 + pad)));
    if (x0 > x1 || y0 > y1) return;
    const double inv_area = 1.0 / area;
    for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
            const double px = x + 0.5;
            const double l0 = edge(b.u, b.v, c.u, c.v, px, py) * inv_area;
            const double l1 = edge(c.u, c.v, a.u, a.v, px, py) * inv_area;
            const double l2 = edge(a.u, a.v, b.u, b.v, px, py) * inv_area;
            if (l0 < -kEdgeSlack || l1 < -kEdgeSlack || l2 < -kEdgeSlack) continue;
            const double q0 = l0 / a.z;
            const double q1 = l1 / b.z;
            const double q2 = l2 / c.z;
            const double inv_z = q0 + q1 + q2;
            if (!(inv_z > 0.0)) continue;
            const double z = 1.0 / inv_z;
            double& zb = out.depth(y, x);
            std::int32_t& tb = out.triangle(y, x);
            if (z < zb || (z == zb && id < tb)) {
                zb = z;
                tb = id;
                out.bary(y, x, 0) = q0 * z;
                out.bary(y, x, 1) = q1 * z;
                out.bary(y, x, 2) = q2 * z;
            }
        }
    }
}

}  // namespace

RasterBuffers rasterize_serial(std::span<const ScreenVertex> verts, std::span<const Triangle> tris, int height,
                               int width, double near_z) {
    RasterBuffers out = make_buffers(height, width);
    for (std::size_t i = 0; i < tris.size(); ++i) {
        const Triangle& t = tris[i];
        raster_triangle(static_cast<std::int32_t>(i), verts[t[0]], verts[t[1]], verts[t[2]], 0, height, near_z,
                        out);
    }
    return out;
}

RasterBuffers rasterize(std::span<const ScreenVertex> verts, std::span<const Triangle> tris, int height, int width,
                        double near_z) {
    RasterBuffers out = make_buffers(height, width);
    constexpr int kBandRows = 8;
    const int bands = (height + kBandRows - 1) / kBandRows;
    const auto n = static_cast<std::int64_t>(tris.size());
    // Each band owns its rows, so no two threads touch the same pixel.
#pragma omp parallel for schedule(dynamic, 1)
    for (int band = 0; band < bands; ++band) {
        const int r0 = band * kBandRows;
        const int r1 = std::min(height, r0 + kBandRows);
        for (std::int64_t i = 0; i < n; ++i) {
            const Triangle& t = tris[static_cast<std::size_t>(i)];
            const ScreenVertex& a = verts[t[0]];
            const ScreenVertex& b = verts[t[1]];
            const ScreenVertex& c = verts[t[2]];
            const double min_v = std::min({a.v, b.v, c.v});
            const double max_v = std::max({a.v, b.v, c.v});
            if (max_v < r0 || min_v > r1 + 1) continue;
            raster_triangle(static_cast<std::int32_t>(i), a, b, c, r0, r1, near_z, out);
        }
    }
    return out;
}

}  // namespace semscene::kernels
