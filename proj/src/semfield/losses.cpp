// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/semfield/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "semscene/common/error.hpp"
#include "semscene/nn/layers.hpp"

namespace semscene::semfield {

namespace {

bool selected(const Mask& mask, Eigen::Index i) { return mask.empty() || mask[static_cast<std::size_t>(i)] != 0; }

void check_mask(const Mask& mask, Eigen::Index n) {
    require(mask.empty() || static_cast<Eigen::Index>(mask.size()) == n, "mask length mismatch");
}

}  // namespace

double semantic_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& target, double eps, Eigen::MatrixXd* grad) {
    require(y.rows() == target.rows() && y.cols() == target.cols(), "semantic_loss: shape mismatch");
    require(y.cols() > 0, "semantic_loss: empty batch");
    const double n = static_cast<double>(y.cols());
    if (grad) *grad = Eigen::MatrixXd::Zero(y.rows(), y.cols());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < y.cols(); ++r) {
        for (Eigen::Index k = 0; k < y.rows(); ++k) {
            const double p = target(k, r);
            if (p == 0.0) continue;
            const double v = y(k, r);
            const double c = std::clamp(v, eps, 1.0);
            loss -= p * std::log(c);
            if (grad && v > eps && v < 1.0) (*grad)(k, r) = -p / (c * n);
        }
    }
    return loss / n;
}

Alignment align_scale_shift(const Eigen::VectorXd& d, const Eigen::VectorXd& dhat, const Mask& mask) {
    require(d.size() == dhat.size(), "align_scale_shift: length mismatch");
    check_mask(mask, d.size());
    double n = 0.0;
    double sd = 0.0;
    double sh = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!selected(mask, i)) continue;
        n += 1.0;
        sd += d[i];
        sh += dhat[i];
    }
    if (n < 2.0) fail(ErrorKind::kDegenerateInput, "scale/shift alignment needs at least two entries");
    const double md = sd / n;
    const double mh = sh / n;
    double var = 0.0;
    double cov = 0.0;
    double scale = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!selected(mask, i)) continue;
        var += (d[i] - md) * (d[i] - md);
        cov += (d[i] - md) * (dhat[i] - mh);
        scale = std::max(scale, std::abs(d[i]));
    }
    if (!(var > 1e-24 * std::max(1.0, scale * scale) * n))
        fail(ErrorKind::kDegenerateInput, "scale/shift alignment is singular: rendered depth is constant");
    const double w = cov / var;
    return {w, mh - w * md};
}

double depth_loss(const Eigen::VectorXd& d, const Eigen::VectorXd& dhat, const Mask& mask, Eigen::VectorXd* grad) {
    const Alignment a = align_scale_shift(d, dhat, mask);
    double n = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) n += selected(mask, i) ? 1.0 : 0.0;
    if (grad) *grad = Eigen::VectorXd::Zero(d.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!selected(mask, i)) continue;
        const double res = a.w * d[i] + a.q - dhat[i];
        loss += res * res;
        if (grad) (*grad)[i] = 2.0 * a.w * res / n;
    }
    return loss / n;
}

double transmittance_loss(const Eigen::VectorXd& t, double eps, Eigen::VectorXd* grad) {
    require(eps > 0.0 && eps < 0.5, "transmittance clamp must lie in (0, 0.5)");
    require(t.size() > 0, "transmittance_loss: empty batch");
    const double n = static_cast<double>(t.size());
    if (grad) *grad = Eigen::VectorXd::Zero(t.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double a = std::clamp(t[i], eps, 1.0 - eps);
        const double b = std::clamp(1.0 - t[i], eps, 1.0 - eps);
        loss += std::log(a) + std::log(b);
        if (grad) {
            double g = 0.0;
            if (t[i] > eps && t[i] < 1.0 - eps) g += 1.0 / a;
            if (1.0 - t[i] > eps && 1.0 - t[i] < 1.0 - eps) g -= 1.0 / b;
            (*grad)[i] = g / n;
        }
    }
    return loss / n;
}

double eikonal_loss(const Eigen::Matrix3Xd& gradients, Eigen::Matrix3Xd* grad) {
    require(gradients.cols() > 0, "eikonal_loss: no points");
    const double n = static_cast<double>(gradients.cols());
    if (grad) grad->setZero(3, gradients.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < gradients.cols(); ++i) {
        const double norm = gradients.col(i).norm();
        loss += (norm - 1.0) * (norm - 1.0);
        if (grad && norm > 0.0) grad->col(i) = 2.0 * (norm - 1.0) / (norm * n) * gradients.col(i);
    }
    return loss / n;
}

int ordinal_label(double dhat0, double dhat1, double tau) {
    const double diff = dhat0 - dhat1;
    if (diff >= tau) return 1;
    if (diff <= -tau) return -1;
    return 0;
}

std::vector<RankPair> sample_rank_pairs(const Eigen::VectorXd& dhat, const Mask& mask, double tau, int num_pairs,
                                        std::uint64_t seed) {
    require(tau > 0.0, "ranking tolerance must be positive");
    check_mask(mask, dhat.size());
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < dhat.size(); ++i)
        if (selected(mask, i)) idx.push_back(static_cast<int>(i));
    std::vector<RankPair> pairs;
    if (idx.size() < 2) return pairs;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    for (int k = 0; k < num_pairs; ++k) {
        const int a = idx[pick(rng)];
        int b = idx[pick(rng)];
        if (b == a) b = idx[(pick(rng) + 1) % idx.size()];
        pairs.push_back({a, b, ordinal_label(dhat[a], dhat[b], tau)});
    }
    return pairs;
}

double ranking_loss(const Eigen::VectorXd& p, const std::vector<RankPair>& pairs, Eigen::VectorXd* grad) {
    if (grad) *grad = Eigen::VectorXd::Zero(p.size());
    if (pairs.empty()) return 0.0;
    const double n = static_cast<double>(pairs.size());
    double loss = 0.0;
    for (const RankPair& pr : pairs) {
        const double diff = p[pr.first] - p[pr.second];
        double g = 0.0;
        if (pr.ordinal == 0) {
            loss += diff * diff;
            g = 2.0 * diff;
        } else {
            const double x = -pr.ordinal * diff;
            loss += nn::softplus(x, 1.0);
            g = -pr.ordinal * nn::sigmoid(x);
        }
        if (grad) {
            (*grad)[pr.first] += g / n;
            (*grad)[pr.second] -= g / n;
        }
    }
    return loss / n;
}

double ranking_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& dhat, double tau, int num_pairs,
                    std::uint64_t seed, Eigen::VectorXd* grad) {
    require(p.size() == dhat.size(), "ranking_loss: length mismatch");
    return ranking_loss(p, sample_rank_pairs(dhat, {}, tau, num_pairs, seed), grad);
}

double src_depth_loss(const Eigen::VectorXd& d, const Eigen::VectorXd& dsrc, const Mask& valid, Eigen::VectorXd* grad) {
    require(d.size() == dsrc.size(), "src_depth_loss: length mismatch");
    check_mask(valid, d.size());
    if (grad) *grad = Eigen::VectorXd::Zero(d.size());
    double n = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) n += selected(valid, i) ? 1.0 : 0.0;
    if (n == 0.0) return 0.0;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!selected(valid, i)) continue;
        const double diff = d[i] - dsrc[i];
        loss += std::abs(diff);
        if (grad) (*grad)[i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / n;
    }
    return loss / n;
}

double src_depth_loss(const std::vector<Eigen::VectorXd>& d, const std::vector<Eigen::VectorXd>& dsrc,
                      const std::vector<Mask>& valid, std::vector<Eigen::VectorXd>* grad) {
    require(d.size() == dsrc.size() && d.size() == valid.size(), "src_depth_loss: view count mismatch");
    if (grad) grad->assign(d.size(), {});
    double total = 0.0;
    for (std::size_t v = 0; v < d.size(); ++v) total += src_depth_loss(d[v], dsrc[v], valid[v], grad ? &(*grad)[v] : nullptr);
    return total;
}

void LossWeights::validate() const {
    require(depth >= 0.0 && trans >= 0.0 && sem >= 0.0 && eik >= 0.0 && rank >= 0.0 && src >= 0.0,
            "loss weights must be non-negative");
    require(eps > 0.0 && eps < 0.5, "transmittance clamp must lie in (0, 0.5)");
    require(tau_fraction > 0.0, "ranking tolerance must be positive");
}

double total_loss(const LossComponents& c, const LossWeights& w) {
    const std::pair<const char*, double> parts[] = {{"depth", c.depth}, {"trans", c.trans}, {"sem", c.sem},
                                                    {"eik", c.eik},     {"rank", c.rank},   {"src", c.src}};
    for (const auto& [name, v] : parts)
        if (!std::isfinite(v)) fail(ErrorKind::kNumeric, std::string("non-finite loss component: ") + name);
    return w.depth * c.depth + w.trans * c.trans + w.sem * c.sem + w.eik * c.eik + w.rank * c.rank + w.src * c.src;
}

}  // namespace semscene::semfield
