// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace semscene {

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    /// Square pixels, principal point at the image center.
    static Intrinsics from_fov(int height, int width, double fov_x_deg);
};

struct Ray {
    Eigen::Vector3d origin;
    Eigen::Vector3d dir;  // unit length
};

/// Pinhole camera. Pose maps world to camera: X_cam = R * X_world + t.
/// Camera axes follow the image: +x right, +y down, +z forward. Pixel (x, y)
/// covers [x, x+1) x [y, y+1) and is sampled at its center (x+0.5, y+0.5).
class Camera {
public:
    Camera() = default;
    Camera(const Intrinsics& k, const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
           int height, int width);

    /// Camera at `eye` looking at `target`; `up` is a world direction that
    /// maps to image -y.
    static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up, const Intrinsics& k, int height, int width);

    const Intrinsics& intrinsics() const { return k_; }
    const Eigen::Matrix3d& rotation() const { return R_; }
    const Eigen::Vector3d& translation() const { return t_; }
    int height() const { return height_; }
    int width() const { return width_; }

    Eigen::Vector3d center() const { return -R_.transpose() * t_; }
    Eigen::Vector3d forward() const { return R_.row(2).transpose(); }

    Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return R_ * world + t_; }
    Eigen::Vector3d to_world(const Eigen::Vector3d& cam) const { return R_.transpose() * (cam - t_); }

    /// Continuous pixel coordinates and z-depth of a world point.
    Eigen::Vector3d project(const Eigen::Vector3d& world) const;
    /// World point at pixel coordinate (u, v) with camera z-depth `z`.
    Eigen::Vector3d unproject(double u, double v, double z) const;
    /// Ray through continuous pixel coordinate (u, v).
    Ray ray(double u, double v) const;
    /// Ray through the center of pixel (x, y).
    Ray pixel_ray(int x, int y) const { return ray(x + 0.5, y + 0.5); }

private:
    Intrinsics k_;
    Eigen::Matrix3d R_ = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t_ = Eigen::Vector3d::Zero();
    int height_ = 0;
    int width_ = 0;
};

/// Axis-aligned box.
struct Box {
    Eigen::Vector3d lo = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi = Eigen::Vector3d::Zero();

    Eigen::Vector3d center() const { return 0.5 * (lo + hi); }
    Eigen::Vector3d extent() const { return hi - lo; }
    bool contains(const Eigen::Vector3d& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
    /// Parametric interval [t0, t1] of the ray inside the box, clipped to
    /// t >= 0. Returns false when the ray misses.
    bool intersect(const Ray& ray, double& t0, double& t1) const;
};

}  // namespace semscene
