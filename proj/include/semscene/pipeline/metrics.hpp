// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semscene/scenekit/camera.hpp"
#include "semscene/scenekit/types.hpp"

namespace semscene::pipeline {

// Positions uniform in the axis-aligned box, each looking at `lookat` with +z up.
std::vector<Camera> sample_cameras(const Box& box, const Eigen::Vector3d& lookat, int n, std::uint64_t seed,
                                   const Intrinsics& k, int height, int width);

void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cameras);
std::vector<Camera> load_cameras(const std::filesystem::path& path);

// Mean over ordered pairs of the label disagreement after warping view i into view j.
double vsc_score(const std::vector<SemanticMask>& masks, const std::vector<DepthMap>& depths,
                 const std::vector<Camera>& cameras);

inline constexpr double kNllSmoothing = 0.05;

// Mean -log p(rendered label) under a smoothed delta distribution at the reference label.
double nll_score(const std::vector<SemanticMask>& rendered, const std::vector<SemanticMask>& reference,
                 double smoothing = kNllSmoothing);

double label_accuracy(const SemanticMask& a, const SemanticMask& b);

// Mean |w d + q - d*| / d* over pixels valid in both maps, with (w, q) fitted by least squares.
double aligned_abs_rel(const std::vector<DepthMap>& predicted, const std::vector<DepthMap>& reference);

class EvalReport {
public:
    void set(const std::string& key, double value);
    double get(const std::string& key) const;
    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, double>& values() const { return values_; }

    std::string to_text() const;
    static EvalReport from_text(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static EvalReport load(const std::filesystem::path& path);

    friend bool operator==(const EvalReport& a, const EvalReport& b) { return a.values_ == b.values_; }

private:
    std::map<std::string, double> values_;
};

}  // namespace semscene::pipeline
