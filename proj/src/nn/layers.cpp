// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "semscene/common/error.hpp"

namespace semscene::nn {

void add_linear(ParamStore& ps, const std::string& prefix, int in, int out, std::mt19937_64& rng, int& w, int& b) {
    w = ps.add(prefix + ".weight", {out, in});
    b = ps.add(prefix + ".bias", {out});
    init_uniform(ps[w], std::sqrt(6.0 / (in + out)), rng);
}

void linear_forward(const Tensor& w, const Tensor& b, const Mat& x, Mat& y) {
    y.noalias() = w.matrix() * x;
    y.colwise() += b.vector();
}

void linear_backward(Tensor& w, Tensor& b, const Mat& x, const Mat& dy, Mat* dx) {
    w.grad_matrix().noalias() += dy * x.transpose();
    b.grad_vector() += dy.rowwise().sum();
    if (dx) dx->noalias() = w.matrix().transpose() * dy;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x, double beta) {
    const double z = beta * x;
    return (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)))) / beta;
}

double softplus_grad(double x, double beta) { return sigmoid(beta * x); }

Conv2d add_conv(ParamStore& ps, const std::string& prefix, int cin, int cout, int k, int stride, std::mt19937_64& rng) {
    require(k % 2 == 1 && (stride == 1 || stride == 2), "conv: odd kernel and stride 1 or 2 only");
    Conv2d c;
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.stride = stride;
    c.weight = ps.add(prefix + ".weight", {cout, cin * k * k});
    c.bias = ps.add(prefix + ".bias", {cout});
    // He-uniform for leaky-ReLU nets.
    init_uniform(ps[c.weight], std::sqrt(6.0 / (cin * k * k)), rng);
    return c;
}

namespace {

int out_size(int n, int stride) { return (n + stride - 1) / stride; }

// cols is (cin*k*k) x (ho*wo), row-major.
void im2col(const double* img, int cin, int h, int w, int k, int stride, RowMat& cols) {
    const int ho = out_size(h, stride);
    const int wo = out_size(w, stride);
    const int pad = k / 2;
    cols.resize(static_cast<Eigen::Index>(cin) * k * k, static_cast<Eigen::Index>(ho) * wo);
    for (int ci = 0; ci < cin; ++ci) {
        const double* src = img + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ho * wo;
                for (int y = 0; y < ho; ++y) {
                    const int sy = y * stride + ky - pad;
                    for (int x = 0; x < wo; ++x) {
                        const int sx = x * stride + kx - pad;
                        row[y * wo + x] = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? src[sy * w + sx] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const RowMat& cols, int cin, int h, int w, int k, int stride, double* img) {
    const int ho = out_size(h, stride);
    const int wo = out_size(w, stride);
    const int pad = k / 2;
    for (int ci = 0; ci < cin; ++ci) {
        double* dst = img + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ho * wo;
                for (int y = 0; y < ho; ++y) {
                    const int sy = y * stride + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    for (int x = 0; x < wo; ++x) {
                        const int sx = x * stride + kx - pad;
                        if (sx >= 0 && sx < w) dst[sy * w + sx] += row[y * wo + x];
                    }
                }
            }
        }
    }
}

}  // namespace

FeatureMap conv_forward(const ParamStore& ps, const Conv2d& conv, const FeatureMap& x) {
    require(x.c == conv.cin, "conv input channel mismatch");
    const int ho = out_size(x.h, conv.stride);
    const int wo = out_size(x.w, conv.stride);
    FeatureMap y(x.n, conv.cout, ho, wo);
    const auto wmat = ps[conv.weight].matrix();
    const auto bias = ps[conv.bias].vector();
    RowMat cols;
    for (int i = 0; i < x.n; ++i) {
        im2col(x.image(i), x.c, x.h, x.w, conv.k, conv.stride, cols);
        Eigen::Map<RowMat> out(y.image(i), conv.cout, static_cast<Eigen::Index>(ho) * wo);
        out.noalias() = wmat * cols;
        out.colwise() += bias;
    }
    return y;
}

FeatureMap conv_backward(ParamStore& ps, const Conv2d& conv, const FeatureMap& x, const FeatureMap& dy) {
    const int ho = out_size(x.h, conv.stride);
    const int wo = out_size(x.w, conv.stride);
    require(dy.c == conv.cout && dy.h == ho && dy.w == wo && dy.n == x.n, "conv gradient shape mismatch");
    FeatureMap dx(x.n, x.c, x.h, x.w);
    Tensor& wt = ps[conv.weight];
    Tensor& bt = ps[conv.bias];
    auto wgrad = wt.grad_matrix();
    auto bgrad = bt.grad_vector();
    const auto wmat = wt.matrix();
    RowMat cols;
    RowMat dcols;
    for (int i = 0; i < x.n; ++i) {
        im2col(x.image(i), x.c, x.h, x.w, conv.k, conv.stride, cols);
        Eigen::Map<const RowMat> g(dy.image(i), conv.cout, static_cast<Eigen::Index>(ho) * wo);
        wgrad.noalias() += g * cols.transpose();
        bgrad += g.rowwise().sum();
        dcols.noalias() = wmat.transpose() * g;
        col2im(dcols, x.c, x.h, x.w, conv.k, conv.stride, dx.image(i));
    }
    return dx;
}

FeatureMap leaky_relu(const FeatureMap& x, double slope) {
    FeatureMap y = x;
    for (double& v : y.data) v = v > 0.0 ? v : slope * v;
    return y;
}

FeatureMap leaky_relu_backward(const FeatureMap& x, const FeatureMap& dy, double slope) {
    FeatureMap dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        if (!(x.data[i] > 0.0)) dx.data[i] *= slope;
    }
    return dx;
}

FeatureMap avg_pool2(const FeatureMap& x) {
    require(x.h % 2 == 0 && x.w % 2 == 0, "avg_pool2 needs even spatial size");
    FeatureMap y(x.n, x.c, x.h / 2, x.w / 2);
    for (int i = 0; i < x.n; ++i) {
        for (int c = 0; c < x.c; ++c) {
            for (int yy = 0; yy < y.h; ++yy) {
                for (int xx = 0; xx < y.w; ++xx) {
                    y.at(i, c, yy, xx) = 0.25 * (x.at(i, c, 2 * yy, 2 * xx) + x.at(i, c, 2 * yy, 2 * xx + 1) +
                                                 x.at(i, c, 2 * yy + 1, 2 * xx) + x.at(i, c, 2 * yy + 1, 2 * xx + 1));
                }
            }
        }
    }
    return y;
}

FeatureMap avg_pool2_backward(const FeatureMap& dy, int h, int w) {
    FeatureMap dx(dy.n, dy.c, h, w);
    for (int i = 0; i < dy.n; ++i) {
        for (int c = 0; c < dy.c; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) dx.at(i, c, y, x) = 0.25 * dy.at(i, c, y / 2, x / 2);
            }
        }
    }
    return dx;
}

FeatureMap upsample2(const FeatureMap& x) {
    FeatureMap y(x.n, x.c, 2 * x.h, 2 * x.w);
    for (int i = 0; i < x.n; ++i) {
        for (int c = 0; c < x.c; ++c) {
            for (int yy = 0; yy < y.h; ++yy) {
                for (int xx = 0; xx < y.w; ++xx) y.at(i, c, yy, xx) = x.at(i, c, yy / 2, xx / 2);
            }
        }
    }
    return y;
}

FeatureMap upsample2_backward(const FeatureMap& dy) {
    FeatureMap dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int i = 0; i < dy.n; ++i) {
        for (int c = 0; c < dy.c; ++c) {
            for (int y = 0; y < dy.h; ++y) {
                for (int x = 0; x < dy.w; ++x) dx.at(i, c, y / 2, x / 2) += dy.at(i, c, y, x);
            }
        }
    }
    return dx;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat shape mismatch");
    FeatureMap y(a.n, a.c + b.c, a.h, a.w);
    const std::size_t pa = a.c * a.plane();
    const std::size_t pb = b.c * b.plane();
    for (int i = 0; i < a.n; ++i) {
        std::copy(a.image(i), a.image(i) + pa, y.image(i));
        std::copy(b.image(i), b.image(i) + pb, y.image(i) + pa);
    }
    return y;
}

void split_channels(const FeatureMap& d, int ca, FeatureMap& da, FeatureMap& db) {
    da = FeatureMap(d.n, ca, d.h, d.w);
    db = FeatureMap(d.n, d.c - ca, d.h, d.w);
    const std::size_t pa = ca * d.plane();
    const std::size_t pb = (d.c - ca) * d.plane();
    for (int i = 0; i < d.n; ++i) {
        std::copy(d.image(i), d.image(i) + pa, da.image(i));
        std::copy(d.image(i) + pa, d.image(i) + pa + pb, db.image(i));
    }
}

}  // namespace semscene::nn
