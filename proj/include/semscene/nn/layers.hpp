// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <Eigen/Core>

#include "semscene/nn/params.hpp"

namespace semscene::nn {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---- dense layers, one sample per column ----

/// Registers W (out x in) and b (out) under `prefix` with a uniform
/// +-sqrt(6 / (in + out)) init.
void add_linear(ParamStore& ps, const std::string& prefix, int in, int out, std::mt19937_64& rng, int& w, int& b);

/// y = W x + b
void linear_forward(const Tensor& w, const Tensor& b, const Mat& x, Mat& y);
/// Accumulates dW, db; writes dx if non-null.
void linear_backward(Tensor& w, Tensor& b, const Mat& x, const Mat& dy, Mat* dx);

/// Softplus with sharpness beta: log(1 + exp(beta x)) / beta.
double softplus(double x, double beta);
/// d softplus / dx = sigmoid(beta x).
double softplus_grad(double x, double beta);
double sigmoid(double x);

// ---- image layers, NCHW ----

struct FeatureMap {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    AlignedVector data;

    FeatureMap() = default;
    FeatureMap(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    double& at(int in, int ic, int y, int x) { return data[((static_cast<std::size_t>(in) * c + ic) * h + y) * w + x]; }
    double at(int in, int ic, int y, int x) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + y) * w + x];
    }
    double* image(int in) { return data.data() + static_cast<std::size_t>(in) * c * plane(); }
    const double* image(int in) const { return data.data() + static_cast<std::size_t>(in) * c * plane(); }
};

/// Square-kernel convolution, zero padding k/2, stride 1 or 2.
struct Conv2d {
    int weight = -1;  // (cout, cin*k*k), column-major in the store
    int bias = -1;
    int cin = 0;
    int cout = 0;
    int k = 3;
    int stride = 1;
};

Conv2d add_conv(ParamStore& ps, const std::string& prefix, int cin, int cout, int k, int stride,
                std::mt19937_64& rng);

FeatureMap conv_forward(const ParamStore& ps, const Conv2d& conv, const FeatureMap& x);
/// Accumulates parameter gradients; returns dL/dx.
FeatureMap conv_backward(ParamStore& ps, const Conv2d& conv, const FeatureMap& x, const FeatureMap& dy);

FeatureMap leaky_relu(const FeatureMap& x, double slope = 0.2);
/// Gradient through leaky_relu given the layer input.
FeatureMap leaky_relu_backward(const FeatureMap& x, const FeatureMap& dy, double slope = 0.2);

FeatureMap avg_pool2(const FeatureMap& x);
FeatureMap avg_pool2_backward(const FeatureMap& dy, int h, int w);
FeatureMap upsample2(const FeatureMap& x);
FeatureMap upsample2_backward(const FeatureMap& dy);

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);
/// Splits a gradient of concat_channels(a, b) back into its parts.
void split_channels(const FeatureMap& d, int ca, FeatureMap& da, FeatureMap& db);

}  // namespace semscene::nn
