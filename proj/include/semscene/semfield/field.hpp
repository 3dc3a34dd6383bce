// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "semscene/nn/layers.hpp"
#include "semscene/scenekit/camera.hpp"

namespace semscene::semfield {

using Mat = nn::Mat;
using Points = Eigen::Matrix3Xd;

/// Frequency encoding [sin(2^j pi x), cos(2^j pi x)] for j = 0..L-1, each
/// block over the three coordinates, optionally prefixed by x itself.
struct PositionalEncoding {
    int bands = 6;
    bool include_input = false;

    int dim() const { return 6 * bands + (include_input ? 3 : 0); }
    Eigen::VectorXd encode(const Eigen::Vector3d& x) const;
    /// Column-wise encoding of a 3 x N batch.
    Mat encode_batch(const Points& x) const;
    /// d encode / d x for one point (dim x 3).
    Mat jacobian(const Eigen::Vector3d& x) const;
};

/// Laplace-CDF density alpha * Psi_beta(-d).
double sdf_to_density(double d, double alpha, double beta);
/// Partial derivatives of sdf_to_density with alpha = 1 / beta, w.r.t. d
/// and beta.
void density_partials(double d, double beta, double& sigma, double& dsigma_dd, double& dsigma_dbeta);

struct FieldConfig {
    int num_classes = 4;
    /// Width c of the feature vector z.
    int feature_dim = 16;
    int sdf_width = 64;
    /// Hidden layers of the SDF network.
    int sdf_layers = 3;
    int sem_width = 32;
    int sem_layers = 1;
    double softplus_beta = 100.0;
    double init_beta = 0.1;
    /// Lower bound of beta; keeps the density resolvable by the sampler.
    double min_beta = 0.01;
    PositionalEncoding encoding;
    /// Points are normalized by this box before encoding.
    Box bounds{{-1.5, -1.5, -0.5}, {1.5, 1.5, 1.0}};

    void validate() const;
};

/// Dense softplus network: hidden layers with softplus, linear output.
struct Mlp {
    std::vector<int> weights;
    std::vector<int> biases;
    double beta = 100.0;

    struct Cache {
        std::vector<Mat> inputs;  // input of every layer
        std::vector<Mat> slope;   // softplus slope of every hidden layer
    };
    int layers() const { return static_cast<int>(weights.size()); }
    Mat forward(const nn::ParamStore& ps, const Mat& x, Cache* cache) const;
    /// Accumulates parameter gradients; returns dL/dx if `dx` is non-null.
    void backward(nn::ParamStore& ps, const Cache& cache, const Mat& dout, Mat* dx) const;
};

/// Batched evaluation results; columns are points.
struct FieldEval {
    Eigen::RowVectorXd sdf;
    Mat logits;  // num_classes x N
    Mlp::Cache sdf_cache;
    Mlp::Cache sem_cache;
};

/// SDF network f_theta (encoded position -> d, z) and semantic head
/// f_phi (z -> logits), with the density scale beta = |b| + min_beta.
class SemanticField {
public:
    SemanticField(const FieldConfig& cfg, std::uint64_t seed);

    static SemanticField load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const FieldConfig& config() const { return cfg_; }
    int num_classes() const { return cfg_.num_classes; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    double beta() const;
    double alpha() const { return 1.0 / beta(); }
    int beta_index() const { return beta_; }
    /// d beta / d b.
    double beta_slope() const;

    /// Box-normalized coordinates fed to the encoding.
    Points normalize(const Points& x) const;
    double normalize_scale() const;

    /// SDF only (no caches).
    Eigen::RowVectorXd sdf(const Points& x) const;
    /// SDF and semantic logits. With `keep_cache` the result can be passed to
    /// backward().
    FieldEval evaluate(const Points& x, bool keep_cache) const;
    /// Accumulates parameter gradients from dL/dsdf (1 x N) and dL/dlogits.
    void backward(const FieldEval& eval, const Eigen::RowVectorXd& dsdf, const Mat& dlogits);

    /// World-space SDF gradients (3 x N).
    Points sdf_gradient(const Points& x) const;
    /// Mean (|grad f| - 1)^2 over the points. If `weight` is non-zero the
    /// parameter gradients of weight * loss are accumulated.
    double eikonal(const Points& x, double weight);

    /// Argmax semantic label per point.
    std::vector<int> labels(const Points& x) const;

    /// Fits the SDF to the plane z - height on random box points.
    void init_plane(double height, int iterations, std::uint64_t seed);

private:
    SemanticField() = default;
    void build(std::uint64_t seed);

    FieldConfig cfg_;
    nn::ParamStore params_;
    Mlp sdf_net_;
    Mlp sem_net_;
    int beta_ = -1;
};

}  // namespace semscene::semfield
