// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Core>

#include "semscene/scenekit/camera.hpp"
#include "semscene/scenekit/oracle_scene.hpp"

namespace semscene::testing {

inline const Eigen::Vector3d kEye(0.0, -1.2, 1.1);
inline const Eigen::Vector3d kTarget(0.0, 0.3, 0.0);

inline Camera scene_camera(int h, int w, const Eigen::Vector3d& eye = kEye,
                           const Eigen::Vector3d& target = kTarget) {
    return Camera::look_at(eye, target, Eigen::Vector3d::UnitZ(), Intrinsics::from_fov(h, w, 60.0), h, w);
}

/// Camera straight above (0, 0) looking down at a plane `dist` below it.
inline Camera down_camera(int h, int w, double plane_z, double dist) {
    const Eigen::Vector3d eye(0.0, 0.0, plane_z + dist);
    return Camera::look_at(eye, eye - Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(),
                           Intrinsics::from_fov(h, w, 50.0), h, w);
}

inline std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "semscene_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace semscene::testing
