// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/pipeline/corpus.hpp"

#include <random>

#include "semscene/common/error.hpp"
#include "semscene/common/hash.hpp"
#include "semscene/scenekit/oracle_scene.hpp"
#include "semscene/warp/warp.hpp"

namespace semscene::pipeline {

namespace {

constexpr float kSkyPlaneZ = 4.0f;

inpaint::TrainingPair make_pair(const CorpusConfig& cfg, int index) {
    const Box bounds = default_scene_bounds();
    const OracleScene scene =
        make_oracle_scene(cfg.seed + static_cast<std::uint64_t>(index % cfg.scenes), cfg.num_classes, bounds);
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Intrinsics k = Intrinsics::from_fov(cfg.resolution, cfg.resolution, cfg.fov_deg);
    for (int attempt = 0;; ++attempt) {
        const Eigen::Vector3d eye(0.4 * u(rng), -1.2 + 0.2 * u(rng), 1.1 + 0.15 * u(rng));
        const Eigen::Vector3d target(0.3 * u(rng), 0.3 + 0.2 * u(rng), 0.0);
        const Camera cam = Camera::look_at(eye, target, Eigen::Vector3d::UnitZ(), k, cfg.resolution, cfg.resolution);
        auto [mask, depth] = render_oracle(scene, cam);
        const DepthMap filled = fill_invalid_depth(depth, kSkyPlaneZ);
        const double half = 0.5 * cfg.pose_box;
        auto pair = warp::warpback_pair(mask, filled, cam, warp::box_pose_sampler(Eigen::Vector3d::Constant(half), target),
                                        rng());
        if (pair.corrupted.has_holes() || attempt >= 8) return {std::move(pair.corrupted), std::move(pair.target)};
    }
}

}  // namespace

std::vector<inpaint::TrainingPair> make_warpback_corpus(const CorpusConfig& cfg) {
    require(cfg.count > 0 && cfg.resolution > 0 && cfg.scenes > 0, "corpus sizes must be positive");
    require(cfg.num_classes >= 2, "corpus needs at least two classes");
    require(cfg.pose_box >= 0.0, "pose box must be non-negative");
    std::vector<inpaint::TrainingPair> pairs(static_cast<std::size_t>(cfg.count));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < cfg.count; ++i) pairs[static_cast<std::size_t>(i)] = make_pair(cfg, i);
    return pairs;
}

}  // namespace semscene::pipeline
