// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/scenekit/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "semscene/common/error.hpp"

namespace semscene {

Intrinsics Intrinsics::from_fov(int height, int width, double fov_x_deg) {
    require(fov_x_deg > 0.0 && fov_x_deg < 180.0, "field of view must lie in (0, 180)");
    const double f = 0.5 * width / std::tan(0.5 * fov_x_deg * std::numbers::pi / 180.0);
    return {f, f, 0.5 * width, 0.5 * height};
}

Camera::Camera(const Intrinsics& k, const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
               int height, int width)
    : k_(k), R_(rotation), t_(translation), height_(height), width_(width) {
    require(k.fx > 0.0 && k.fy > 0.0, "focal lengths must be positive");
    require(height > 0 && width > 0, "camera resolution must be positive");
    const double ortho = (R_ * R_.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    require(ortho <= 1e-6 && std::abs(R_.determinant() - 1.0) <= 1e-6,
            "camera rotation must be orthonormal with determinant +1");
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                       const Intrinsics& k, int height, int width) {
    Eigen::Vector3d fwd = target - eye;
    require(fwd.norm() > 1e-12, "look_at target coincides with the eye");
    fwd.normalize();
    Eigen::Vector3d right = fwd.cross(up);
    if (right.norm() < 1e-9) {
        // Looking straight along `up`; any perpendicular works.
        right = fwd.cross(std::abs(fwd.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY());
    }
    right.normalize();
    const Eigen::Vector3d down = fwd.cross(right);
    Eigen::Matrix3d R;
    R.row(0) = right.transpose();
    R.row(1) = down.transpose();
    R.row(2) = fwd.transpose();
    return Camera(k, R, -R * eye, height, width);
}

Eigen::Vector3d Camera::project(const Eigen::Vector3d& world) const {
    const Eigen::Vector3d c = to_camera(world);
    return {k_.fx * c.x() / c.z() + k_.cx, k_.fy * c.y() / c.z() + k_.cy, c.z()};
}

Eigen::Vector3d Camera::unproject(double u, double v, double z) const {
    const Eigen::Vector3d c((u - k_.cx) / k_.fx * z, (v - k_.cy) / k_.fy * z, z);
    return to_world(c);
}

Ray Camera::ray(double u, double v) const {
    const Eigen::Vector3d d_cam((u - k_.cx) / k_.fx, (v - k_.cy) / k_.fy, 1.0);
    return {center(), (R_.transpose() * d_cam).normalized()};
}

bool Box::intersect(const Ray& ray, double& t0, double& t1) const {
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a];
        const double d = ray.dir[a];
        if (std::abs(d) < 1e-300) {
            if (o < lo[a] || o > hi[a]) return false;
            continue;
        }
        double ta = (lo[a] - o) / d;
        double tb = (hi[a] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace semscene
