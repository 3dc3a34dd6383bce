// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace semscene::nn {

/// Storage aligned for Eigen's vector units, so reductions over mapped
/// buffers do not depend on where malloc placed them.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Named parameter array with its gradient accumulator. Matrices are stored
/// column-major so `matrix()` can map them without copying.
struct Tensor {
    std::string name;
    std::vector<int> shape;
    AlignedVector value;
    AlignedVector grad;

    std::size_t size() const { return value.size(); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : static_cast<int>(size() / shape[0]); }

    Eigen::Map<Eigen::MatrixXd> matrix() { return {value.data(), rows(), cols()}; }
    Eigen::Map<const Eigen::MatrixXd> matrix() const { return {value.data(), rows(), cols()}; }
    Eigen::Map<Eigen::MatrixXd> grad_matrix() { return {grad.data(), rows(), cols()}; }
    Eigen::Map<Eigen::VectorXd> vector() { return {value.data(), static_cast<Eigen::Index>(size())}; }
    Eigen::Map<const Eigen::VectorXd> vector() const { return {value.data(), static_cast<Eigen::Index>(size())}; }
    Eigen::Map<Eigen::VectorXd> grad_vector() { return {grad.data(), static_cast<Eigen::Index>(size())}; }
};

class ParamStore {
public:
    /// Adds a zero-initialized tensor and returns its index.
    int add(const std::string& name, std::vector<int> shape);

    Tensor& operator[](int i) { return tensors_[static_cast<std::size_t>(i)]; }
    const Tensor& operator[](int i) const { return tensors_[static_cast<std::size_t>(i)]; }
    /// Index of the tensor called `name`, or -1.
    int find(const std::string& name) const;

    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::size_t parameter_count() const;

    void zero_grad();
    /// Concatenated values, in tensor order.
    std::vector<double> flat_values() const;
    void set_flat_values(const std::vector<double>& flat);
    std::vector<double> flat_grads() const;

    /// Same names, shapes and values.
    bool same_values(const ParamStore& other) const;

private:
    std::vector<Tensor> tensors_;
};

/// Uniform(-bound, bound) fill.
void init_uniform(Tensor& t, double bound, std::mt19937_64& rng);
/// Normal(mean, stddev) fill.
void init_normal(Tensor& t, double mean, double stddev, std::mt19937_64& rng);

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(const ParamStore& params, AdamConfig cfg);
    /// One update from the accumulated gradients. A zero learning rate leaves
    /// the parameters untouched.
    void step(ParamStore& params);
    long steps() const { return t_; }
    AdamConfig& config() { return cfg_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

/// Checkpoint blob: magic "SSCK", uint32 version, uint32 tensor count, then a
/// shape table (per tensor: uint32 name length, name bytes, uint32 rank, uint32
/// dims) and finally every tensor's values as little-endian float32.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

/// Rounds every value to float32, matching what a checkpoint round trip gives.
void round_to_float(ParamStore& params);

}  // namespace semscene::nn
