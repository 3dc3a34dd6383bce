// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/semfield/field.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "semscene/common/error.hpp"

namespace semscene::semfield {

namespace {

constexpr const char* kMetaName = "semfield.meta";
constexpr int kMetaSize = 17;

// Softplus and its slope sigmoid(beta a) from one vectorized exponential.
void softplus_eval(const Mat& a, double beta, Mat& value, Mat* slope) {
    const Eigen::ArrayXXd z = beta * a.array();
    const Eigen::ArrayXXd e = (-z.abs()).exp();
    value = ((z.max(0.0) + (1.0 + e).log()) / beta).matrix();
    if (slope) *slope = (z >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e)).matrix();
}

void add_mlp(nn::ParamStore& ps, Mlp& net, const std::string& prefix, const std::vector<int>& sizes, double beta,
             std::mt19937_64& rng) {
    net = Mlp{};
    net.beta = beta;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        int w = -1;
        int b = -1;
        nn::add_linear(ps, prefix + std::to_string(l), sizes[l], sizes[l + 1], rng, w, b);
        net.weights.push_back(w);
        net.biases.push_back(b);
    }
}

}  // namespace

Eigen::VectorXd PositionalEncoding::encode(const Eigen::Vector3d& x) const {
    Points p(3, 1);
    p.col(0) = x;
    return encode_batch(p).col(0);
}

Mat PositionalEncoding::encode_batch(const Points& x) const {
    Mat out(dim(), x.cols());
    const int off = include_input ? 3 : 0;
    if (include_input) out.topRows(3) = x;
    for (int j = 0; j < bands; ++j) {
        const double f = std::ldexp(std::numbers::pi, j);
        out.middleRows(off + 6 * j, 3) = (f * x.array()).sin().matrix();
        out.middleRows(off + 6 * j + 3, 3) = (f * x.array()).cos().matrix();
    }
    return out;
}

Mat PositionalEncoding::jacobian(const Eigen::Vector3d& x) const {
    Mat jac = Mat::Zero(dim(), 3);
    const int off = include_input ? 3 : 0;
    if (include_input) jac.topRows(3).setIdentity();
    for (int j = 0; j < bands; ++j) {
        const double f = std::ldexp(std::numbers::pi, j);
        for (int a = 0; a < 3; ++a) {
            jac(off + 6 * j + a, a) = f * std::cos(f * x[a]);
            jac(off + 6 * j + 3 + a, a) = -f * std::sin(f * x[a]);
        }
    }
    return jac;
}

double sdf_to_density(double d, double alpha, double beta) {
    require(alpha > 0.0 && beta > 0.0, "density parameters must be positive");
    const double s = -d / beta;
    const double cdf = s <= 0.0 ? 0.5 * std::exp(s) : 1.0 - 0.5 * std::exp(-s);
    return alpha * cdf;
}

void density_partials(double d, double beta, double& sigma, double& dsigma_dd, double& dsigma_dbeta) {
    const double s = -d / beta;
    const double pdf = 0.5 * std::exp(-std::abs(s));
    const double cdf = s <= 0.0 ? 0.5 * std::exp(s) : 1.0 - 0.5 * std::exp(-s);
    const double ib = 1.0 / beta;
    sigma = cdf * ib;
    dsigma_dd = -pdf * ib * ib;
    dsigma_dbeta = (pdf * d * ib - cdf) * ib * ib;
}

void FieldConfig::validate() const {
    require(num_classes >= 2, "semantic field needs at least two classes");
    require(feature_dim > 0 && sdf_width > 0 && sdf_layers > 0 && sem_width > 0 && sem_layers >= 0,
            "semantic field sizes must be positive");
    require(softplus_beta > 0.0 && init_beta > 1e-4, "softplus beta must be positive and density beta above 1e-4");
    require(encoding.bands >= 0 && encoding.dim() > 0, "positional encoding is empty");
    require((bounds.hi.array() > bounds.lo.array()).all(), "field bounds are degenerate");
}

Mat Mlp::forward(const nn::ParamStore& ps, const Mat& x, Cache* cache) const {
    if (cache) {
        cache->inputs.clear();
        cache->slope.clear();
    }
    Mat h = x;
    for (int l = 0; l < layers(); ++l) {
        Mat a;
        nn::linear_forward(ps[weights[l]], ps[biases[l]], h, a);
        if (cache) cache->inputs.push_back(std::move(h));
        if (l + 1 == layers()) return a;
        if (cache) {
            cache->slope.emplace_back();
            softplus_eval(a, beta, h, &cache->slope.back());
        } else {
            softplus_eval(a, beta, h, nullptr);
        }
    }
    return h;
}

void Mlp::backward(nn::ParamStore& ps, const Cache& cache, const Mat& dout, Mat* dx) const {
    Mat g = dout;
    for (int l = layers() - 1; l >= 0; --l) {
        if (l + 1 < layers()) g.array() *= cache.slope[l].array();
        Mat dh;
        nn::linear_backward(ps[weights[l]], ps[biases[l]], cache.inputs[l], g, (l > 0 || dx) ? &dh : nullptr);
        g = std::move(dh);
    }
    if (dx) *dx = std::move(g);
}

SemanticField::SemanticField(const FieldConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    build(seed);
}

void SemanticField::build(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5EF1E1DULL);
    params_ = nn::ParamStore();
    std::vector<int> sdf_sizes = {cfg_.encoding.dim()};
    for (int l = 0; l < cfg_.sdf_layers; ++l) sdf_sizes.push_back(cfg_.sdf_width);
    sdf_sizes.push_back(1 + cfg_.feature_dim);
    add_mlp(params_, sdf_net_, "sdf", sdf_sizes, cfg_.softplus_beta, rng);
    std::vector<int> sem_sizes = {cfg_.feature_dim};
    for (int l = 0; l < cfg_.sem_layers; ++l) sem_sizes.push_back(cfg_.sem_width);
    sem_sizes.push_back(cfg_.num_classes);
    add_mlp(params_, sem_net_, "sem", sem_sizes, cfg_.softplus_beta, rng);
    beta_ = params_.add("beta", {1});
    params_[beta_].value[0] = cfg_.init_beta - cfg_.min_beta;
}

SemanticField SemanticField::load(const std::filesystem::path& path) {
    nn::ParamStore stored = nn::load_checkpoint(path);
    const int meta = stored.find(kMetaName);
    if (meta < 0 || stored[meta].size() != kMetaSize) fail(ErrorKind::kFormat, "not a semantic field checkpoint");
    const auto& m = stored[meta].value;
    FieldConfig cfg;
    cfg.num_classes = static_cast<int>(m[0]);
    cfg.feature_dim = static_cast<int>(m[1]);
    cfg.sdf_width = static_cast<int>(m[2]);
    cfg.sdf_layers = static_cast<int>(m[3]);
    cfg.sem_width = static_cast<int>(m[4]);
    cfg.sem_layers = static_cast<int>(m[5]);
    cfg.softplus_beta = m[6];
    cfg.encoding.bands = static_cast<int>(m[7]);
    cfg.encoding.include_input = m[8] != 0.0;
    cfg.bounds.lo = Eigen::Vector3d(m[9], m[10], m[11]);
    cfg.bounds.hi = Eigen::Vector3d(m[12], m[13], m[14]);
    cfg.init_beta = m[15];
    cfg.min_beta = m[16];
    SemanticField field(cfg, 0);
    for (auto& t : field.params_.tensors()) {
        const int i = stored.find(t.name);
        if (i < 0 || stored[i].shape != t.shape) fail(ErrorKind::kFormat, "semantic field checkpoint lacks " + t.name);
        t.value = stored[i].value;
    }
    return field;
}

void SemanticField::save(const std::filesystem::path& path) const {
    nn::ParamStore out = params_;
    const int meta = out.add(kMetaName, {kMetaSize});
    const Box& b = cfg_.bounds;
    out[meta].value = {static_cast<double>(cfg_.num_classes),
                       static_cast<double>(cfg_.feature_dim),
                       static_cast<double>(cfg_.sdf_width),
                       static_cast<double>(cfg_.sdf_layers),
                       static_cast<double>(cfg_.sem_width),
                       static_cast<double>(cfg_.sem_layers),
                       cfg_.softplus_beta,
                       static_cast<double>(cfg_.encoding.bands),
                       cfg_.encoding.include_input ? 1.0 : 0.0,
                       b.lo.x(), b.lo.y(), b.lo.z(), b.hi.x(), b.hi.y(), b.hi.z(),
                       cfg_.init_beta, cfg_.min_beta};
    nn::save_checkpoint(path, out);
}

double SemanticField::beta() const { return std::abs(params_[beta_].value[0]) + cfg_.min_beta; }

double SemanticField::beta_slope() const { return params_[beta_].value[0] < 0.0 ? -1.0 : 1.0; }

double SemanticField::normalize_scale() const { return cfg_.bounds.extent().maxCoeff(); }

Points SemanticField::normalize(const Points& x) const {
    return (x.colwise() - cfg_.bounds.center()) / normalize_scale();
}

Eigen::RowVectorXd SemanticField::sdf(const Points& x) const {
    const Mat out = sdf_net_.forward(params_, cfg_.encoding.encode_batch(normalize(x)), nullptr);
    return out.row(0);
}

FieldEval SemanticField::evaluate(const Points& x, bool keep_cache) const {
    FieldEval e;
    const Mat out = sdf_net_.forward(params_, cfg_.encoding.encode_batch(normalize(x)), keep_cache ? &e.sdf_cache : nullptr);
    e.sdf = out.row(0);
    e.logits = sem_net_.forward(params_, out.bottomRows(cfg_.feature_dim), keep_cache ? &e.sem_cache : nullptr);
    return e;
}

void SemanticField::backward(const FieldEval& eval, const Eigen::RowVectorXd& dsdf, const Mat& dlogits) {
    Mat dz;
    sem_net_.backward(params_, eval.sem_cache, dlogits, &dz);
    Mat dout(1 + cfg_.feature_dim, dsdf.cols());
    dout.row(0) = dsdf;
    dout.bottomRows(cfg_.feature_dim) = dz;
    sdf_net_.backward(params_, eval.sdf_cache, dout, nullptr);
}

namespace {

// Tangents of the encoding for a batch: dim x 3N, block k holds d/dx_k.
Mat encoding_tangents(const PositionalEncoding& pe, const Points& xn) {
    const Eigen::Index n = xn.cols();
    Mat t = Mat::Zero(pe.dim(), 3 * n);
    const int off = pe.include_input ? 3 : 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            const Eigen::Index col = a * n + i;
            if (pe.include_input) t(a, col) = 1.0;
            for (int j = 0; j < pe.bands; ++j) {
                const double f = std::ldexp(std::numbers::pi, j);
                t(off + 6 * j + a, col) = f * std::cos(f * xn(a, i));
                t(off + 6 * j + 3 + a, col) = -f * std::sin(f * xn(a, i));
            }
        }
    }
    return t;
}

}  // namespace

Points SemanticField::sdf_gradient(const Points& x) const {
    const Points xn = normalize(x);
    const Eigen::Index n = x.cols();
    Mat h = cfg_.encoding.encode_batch(xn);
    Mat t = encoding_tangents(cfg_.encoding, xn);
    const int hidden = sdf_net_.layers() - 1;
    for (int l = 0; l < hidden; ++l) {
        Mat a;
        nn::linear_forward(params_[sdf_net_.weights[l]], params_[sdf_net_.biases[l]], h, a);
        Mat s;
        softplus_eval(a, sdf_net_.beta, h, &s);
        t = s.replicate(1, 3).cwiseProduct(params_[sdf_net_.weights[l]].matrix() * t);
    }
    const Eigen::RowVectorXd g = params_[sdf_net_.weights[hidden]].matrix().row(0) * t;
    Points out(3, n);
    for (int a = 0; a < 3; ++a) out.row(a) = g.segment(a * n, n) / normalize_scale();
    return out;
}

double SemanticField::eikonal(const Points& x, double weight) {
    const Points xn = normalize(x);
    const Eigen::Index n = x.cols();
    const double inv_scale = 1.0 / normalize_scale();
    const double beta = sdf_net_.beta;
    const int hidden = sdf_net_.layers() - 1;
    std::vector<Mat> h_in(static_cast<std::size_t>(hidden) + 1);  // primal input to layer l
    std::vector<Mat> t_in(static_cast<std::size_t>(hidden) + 1);  // tangent input to layer l
    std::vector<Mat> slope(static_cast<std::size_t>(hidden));
    std::vector<Mat> u(static_cast<std::size_t>(hidden));         // W_l t_in[l]
    h_in[0] = cfg_.encoding.encode_batch(xn);
    t_in[0] = encoding_tangents(cfg_.encoding, xn);
    for (int l = 0; l < hidden; ++l) {
        Mat a;
        nn::linear_forward(params_[sdf_net_.weights[l]], params_[sdf_net_.biases[l]], h_in[l], a);
        softplus_eval(a, beta, h_in[l + 1], &slope[l]);
        u[l] = params_[sdf_net_.weights[l]].matrix() * t_in[l];
        t_in[l + 1] = slope[l].replicate(1, 3).cwiseProduct(u[l]);
    }
    nn::Tensor& w_out = params_[sdf_net_.weights[hidden]];
    const Eigen::RowVectorXd g = w_out.matrix().row(0) * t_in[hidden] * inv_scale;
    Eigen::RowVectorXd norm(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        norm[i] = std::sqrt(g[i] * g[i] + g[n + i] * g[n + i] + g[2 * n + i] * g[2 * n + i]);
        loss += (norm[i] - 1.0) * (norm[i] - 1.0);
    }
    loss /= static_cast<double>(n);
    if (weight == 0.0) return loss;

    // Reverse sweep through the tangent recursion.
    Eigen::RowVectorXd dg(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = norm[i] > 0.0 ? weight * 2.0 * (norm[i] - 1.0) / (norm[i] * n) * inv_scale : 0.0;
        for (int a = 0; a < 3; ++a) dg[a * n + i] = c * g[a * n + i];
    }
    w_out.grad_matrix().row(0) += dg * t_in[hidden].transpose();
    Mat dt = w_out.matrix().row(0).transpose() * dg;
    Mat dh = Mat::Zero(dt.rows(), n);
    for (int l = hidden - 1; l >= 0; --l) {
        nn::Tensor& w = params_[sdf_net_.weights[l]];
        nn::Tensor& b = params_[sdf_net_.biases[l]];
        const Mat s3 = slope[l].replicate(1, 3);
        const Mat du = s3.cwiseProduct(dt);
        const Mat prod = dt.cwiseProduct(u[l]);
        Mat ds = prod.leftCols(n) + prod.middleCols(n, n) + prod.rightCols(n);
        const Mat curvature = slope[l].unaryExpr([beta](double s) { return beta * s * (1.0 - s); });
        const Mat da = dh.cwiseProduct(slope[l]) + ds.cwiseProduct(curvature);
        w.grad_matrix().noalias() += da * h_in[l].transpose() + du * t_in[l].transpose();
        b.grad_vector() += da.rowwise().sum();
        if (l > 0) {
            dh.noalias() = w.matrix().transpose() * da;
            dt = w.matrix().transpose() * du;
        }
    }
    return loss;
}

std::vector<int> SemanticField::labels(const Points& x) const {
    const FieldEval e = evaluate(x, false);
    std::vector<int> out(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        Eigen::Index best = 0;
        e.logits.col(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

void SemanticField::init_plane(double height, int iterations, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Box& b = cfg_.bounds;
    nn::ParamStore& ps = params_;
    nn::Adam adam(ps, {1e-3, 0.9, 0.999, 1e-8});
    const int batch = 512;
    for (int it = 0; it < iterations; ++it) {
        Points x(3, batch);
        for (int i = 0; i < batch; ++i)
            for (int a = 0; a < 3; ++a) x(a, i) = b.lo[a] + u(rng) * (b.hi[a] - b.lo[a]);
        Mlp::Cache cache;
        const Mat out = sdf_net_.forward(ps, cfg_.encoding.encode_batch(normalize(x)), &cache);
        Mat dout = Mat::Zero(out.rows(), batch);
        dout.row(0) = 2.0 * (out.row(0) - (x.row(2).array() - height).matrix()) / batch;
        ps.zero_grad();
        sdf_net_.backward(ps, cache, dout, nullptr);
        eikonal(x, 0.1);
        adam.step(ps);
    }
    ps.zero_grad();
}

}  // namespace semscene::semfield
