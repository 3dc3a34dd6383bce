// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace semscene::semfield {

using Mask = std::vector<std::uint8_t>;

/// Cross-entropy of composited probabilities `y` (classes x rays) against
/// `target` (same shape, rows of one-hot or soft labels); probabilities are
/// clamped to [eps, 1]. Mean over rays.
double semantic_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& target, double eps, Eigen::MatrixXd* grad);

struct Alignment {
    double w = 1.0;
    double q = 0.0;
};

/// Least-squares (w, q) minimizing sum (w d + q - dhat)^2 over entries
/// selected by `mask` (all when empty). Throws kDegenerateInput for fewer than
/// two entries or constant d.
Alignment align_scale_shift(const Eigen::VectorXd& d, const Eigen::VectorXd& dhat, const Mask& mask = {});

/// Mean squared residual after alignment over the masked entries. The
/// gradient w.r.t. d treats (w, q) as fixed, which is exact at the optimum.
double depth_loss(const Eigen::VectorXd& d, const Eigen::VectorXd& dhat, const Mask& mask, Eigen::VectorXd* grad);

/// Mean of log(clamp(T)) + log(clamp(1 - T)), clamp to [eps, 1 - eps].
double transmittance_loss(const Eigen::VectorXd& t, double eps, Eigen::VectorXd* grad);

/// Mean (|g| - 1)^2 over gradient columns.
double eikonal_loss(const Eigen::Matrix3Xd& gradients, Eigen::Matrix3Xd* grad);

struct RankPair {
    int first = 0;
    int second = 0;
    int ordinal = 0;  // +1, -1 or 0
};

/// Ordinal label of a pair of reference depths with tolerance tau.
int ordinal_label(double dhat0, double dhat1, double tau);

/// Random pairs among the masked entries, labelled from `dhat`.
std::vector<RankPair> sample_rank_pairs(const Eigen::VectorXd& dhat, const Mask& mask, double tau, int num_pairs,
                                        std::uint64_t seed);

/// Mean pairwise ranking loss on predicted depths `p`.
double ranking_loss(const Eigen::VectorXd& p, const std::vector<RankPair>& pairs, Eigen::VectorXd* grad);
double ranking_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& dhat, double tau, int num_pairs,
                    std::uint64_t seed, Eigen::VectorXd* grad);

/// Mean absolute difference over valid entries of one view.
double src_depth_loss(const Eigen::VectorXd& d, const Eigen::VectorXd& dsrc, const Mask& valid, Eigen::VectorXd* grad);
/// Sum over views of the per-view value.
double src_depth_loss(const std::vector<Eigen::VectorXd>& d, const std::vector<Eigen::VectorXd>& dsrc,
                      const std::vector<Mask>& valid, std::vector<Eigen::VectorXd>* grad);

struct LossWeights {
    double depth = 0.1;
    double trans = 10.0;
    double sem = 1.0;
    double eik = 0.01;
    double rank = 0.1;
    double src = 1.0;
    /// Ranking tolerance as a fraction of the median reference depth.
    double tau_fraction = 0.02;
    double eps = 1e-5;

    void validate() const;
};

struct LossComponents {
    double depth = 0.0;
    double trans = 0.0;
    double sem = 0.0;
    double eik = 0.0;
    double rank = 0.0;
    double src = 0.0;
};

/// Weighted sum; throws kNumeric naming the first non-finite component.
double total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace semscene::semfield
