// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/scenekit/oracle_scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace semscene {

namespace {

constexpr double kMinMarchStep = 1e-4;

void cast_pixel(const OracleScene& scene, const Camera& cam, int x, int y, SemanticMask& mask,
                DepthMap& depth) {
    const Ray ray = cam.pixel_ray(x, y);
    double t = 0.0;
    if (scene.intersect(ray, t)) {
        const Eigen::Vector3d p = ray.origin + t * ray.dir;
        const double z = t * ray.dir.dot(cam.forward());
        if (z > 0.0) {
            mask(y, x) = scene.label_at(p.x(), p.y());
            depth.set(y, x, static_cast<float>(z));
            return;
        }
    }
    mask(y, x) = scene.sky_label();
    depth.invalidate(y, x);
}

}  // namespace

OracleScene::OracleScene(std::uint64_t seed, int num_classes, const Box& bounds, double base_height,
                         std::vector<Bump> bumps)
    : seed_(seed), num_classes_(num_classes), bounds_(bounds), base_height_(base_height),
      bumps_(std::move(bumps)) {
    require(num_classes >= 2, "oracle scene needs at least one foreground class plus sky");
    require((bounds.hi.array() > bounds.lo.array()).all(), "scene bounds must have positive extent");
    for (const Bump& b : bumps_) {
        require(b.sigma > 0.0, "bump sigma must be positive");
        slope_bound_ += std::abs(b.amplitude) / b.sigma * std::exp(-0.5);
    }
    constexpr int kProbe = 129;
    h_min_ = h_max_ = height(bounds.lo.x(), bounds.lo.y());
    for (int j = 0; j < kProbe; ++j) {
        for (int i = 0; i < kProbe; ++i) {
            const double x = bounds.lo.x() + (bounds.hi.x() - bounds.lo.x()) * i / (kProbe - 1);
            const double y = bounds.lo.y() + (bounds.hi.y() - bounds.lo.y()) * j / (kProbe - 1);
            const double h = height(x, y);
            h_min_ = std::min(h_min_, h);
            h_max_ = std::max(h_max_, h);
        }
    }
}

double OracleScene::height(double x, double y) const {
    double h = base_height_;
    for (const Bump& b : bumps_) {
        const double dx = x - b.cx;
        const double dy = y - b.cy;
        h += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    return h;
}

Eigen::Vector2d OracleScene::height_gradient(double x, double y) const {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (const Bump& b : bumps_) {
        const double dx = x - b.cx;
        const double dy = y - b.cy;
        const double s2 = b.sigma * b.sigma;
        const double e = b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
        g.x() -= e * dx / s2;
        g.y() -= e * dy / s2;
    }
    return g;
}

Label OracleScene::label_at(double x, double y) const {
    const int fg = num_classes_ - 1;
    const double span = std::max(h_max_ - h_min_, 1e-9);
    // Height bands with a gentle wobble so that boundaries are not pure contours.
    const double phase = static_cast<double>(seed_ % 97);
    const double t = (height(x, y) - h_min_) / span +
                     0.06 * std::sin(3.1 * x + phase) * std::cos(2.7 * y - 0.5 * phase);
    const int band = std::clamp(static_cast<int>(std::floor(t * fg)), 0, fg - 1);
    return static_cast<Label>(band + 1);
}

bool OracleScene::inside_xy(double x, double y) const {
    return x >= bounds_.lo.x() && x <= bounds_.hi.x() && y >= bounds_.lo.y() && y <= bounds_.hi.y();
}

bool OracleScene::intersect(const Ray& ray, double& t_hit) const {
    double t0 = 0.0;
    double t1 = 0.0;
    if (!bounds_.intersect(ray, t0, t1)) return false;
    auto gap = [&](double t) {
        const Eigen::Vector3d p = ray.origin + t * ray.dir;
        return p.z() - height(p.x(), p.y());
    };
    // |d gap / dt| is bounded, so stepping by gap / lipschitz never skips a root.
    const double lipschitz = std::abs(ray.dir.z()) + slope_bound_ * ray.dir.head<2>().norm() + 1e-12;
    double t = t0;
    double g = gap(t);
    if (g <= 0.0) {
        t_hit = t0;
        return true;
    }
    while (true) {
        double tn = std::min(t + std::max(g / lipschitz, kMinMarchStep), t1);
        const double gn = gap(tn);
        if (gn <= 0.0) {
            double a = t;
            double b = tn;
            for (int it = 0; it < 80 && b - a > 1e-13; ++it) {
                const double m = 0.5 * (a + b);
                (gap(m) > 0.0 ? a : b) = m;
            }
            t_hit = 0.5 * (a + b);
            return true;
        }
        if (tn >= t1) return false;
        t = tn;
        g = gn;
    }
}

Box default_scene_bounds() {
    Box b;
    b.lo = Eigen::Vector3d(-1.5, -1.5, -0.5);
    b.hi = Eigen::Vector3d(1.5, 1.5, 1.0);
    return b;
}

OracleScene make_oracle_scene(std::uint64_t seed, int num_classes, const Box& bounds) {
    require(num_classes >= 2, "make_oracle_scene: num_classes must be >= 2");
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x51ED2701ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Vector3d ext = bounds.extent();
    const int n_bumps = 7;
    std::vector<Bump> bumps;
    bumps.reserve(n_bumps);
    const double z_room = 0.45 * ext.z();
    for (int k = 0; k < n_bumps; ++k) {
        Bump b;
        b.cx = bounds.lo.x() + ext.x() * (0.1 + 0.8 * unit(rng));
        b.cy = bounds.lo.y() + ext.y() * (0.1 + 0.8 * unit(rng));
        b.amplitude = z_room * (-0.25 + 0.75 * unit(rng));
        b.sigma = 0.1 * ext.x() + 0.12 * ext.x() * unit(rng);
        bumps.push_back(b);
    }
    const double base = bounds.lo.z() + 0.3 * ext.z();
    return OracleScene(seed, num_classes, bounds, base, std::move(bumps));
}

OracleScene make_flat_scene(double h0, int num_classes, const Box& bounds) {
    return OracleScene(0, num_classes, bounds, h0, {});
}

std::pair<SemanticMask, DepthMap> render_oracle(const OracleScene& scene, const Camera& cam) {
    SemanticMask mask(cam.height(), cam.width(), scene.num_classes());
    DepthMap depth(cam.height(), cam.width());
    const int h = cam.height();
    const int w = cam.width();
#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) cast_pixel(scene, cam, x, y, mask, depth);
    }
    return {std::move(mask), std::move(depth)};
}

std::pair<SemanticMask, DepthMap> render_oracle_serial(const OracleScene& scene, const Camera& cam) {
    SemanticMask mask(cam.height(), cam.width(), scene.num_classes());
    DepthMap depth(cam.height(), cam.width());
    for (int y = 0; y < cam.height(); ++y) {
        for (int x = 0; x < cam.width(); ++x) cast_pixel(scene, cam, x, y, mask, depth);
    }
    return {std::move(mask), std::move(depth)};
}

DepthMap fill_invalid_depth(const DepthMap& depth, float far_z) {
    require(far_z > 0.0f, "fill depth must be positive");
    DepthMap out = depth;
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            if (!depth.valid(y, x)) out.set(y, x, far_z);
        }
    }
    return out;
}

}  // namespace semscene
