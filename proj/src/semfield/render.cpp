// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/semfield/render.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "semscene/common/error.hpp"
#include "semscene/common/hash.hpp"

namespace semscene::semfield {

namespace {

Points sample_points(const RayBatch& rays, const Mat& t) {
    const Eigen::Index s = t.rows();
    Points p(3, s * rays.size());
    for (Eigen::Index r = 0; r < rays.size(); ++r)
        for (Eigen::Index i = 0; i < s; ++i) p.col(r * s + i) = rays.origins.col(r) + t(i, r) * rays.directions.col(r);
    return p;
}

Mat deltas(const Mat& t, const Eigen::VectorXd& far) {
    Mat d(t.rows(), t.cols());
    for (Eigen::Index r = 0; r < t.cols(); ++r) {
        for (Eigen::Index i = 0; i + 1 < t.rows(); ++i) d(i, r) = t(i + 1, r) - t(i, r);
        d(t.rows() - 1, r) = std::max(0.0, far[r] - t(t.rows() - 1, r));
    }
    return d;
}

// Stratified distances followed by inverse-CDF draws from the coarse weights.
Mat place_samples(const SemanticField& field, const RayBatch& rays, const SampleOptions& opts, Eigen::Index first_ray) {
    const int ns = opts.stratified;
    const int ni = opts.importance;
    const Eigen::Index b = rays.size();
    Mat coarse(ns, b);
    std::vector<std::mt19937_64> rngs;
    rngs.reserve(static_cast<std::size_t>(b));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (Eigen::Index r = 0; r < b; ++r) {
        rngs.emplace_back(mix_seed(opts.seed, static_cast<std::uint64_t>(first_ray + r)));
        const double step = (rays.far[r] - rays.near[r]) / ns;
        for (int k = 0; k < ns; ++k) {
            const double xi = opts.perturb ? u01(rngs.back()) : 0.5;
            coarse(k, r) = rays.near[r] + (k + xi) * step;
        }
    }
    if (ni == 0) return coarse;
    const Eigen::RowVectorXd d = field.sdf(sample_points(rays, coarse));
    const double beta = field.beta();
    const Mat delta = deltas(coarse, rays.far);
    Mat out(ns + ni, b);
    std::vector<double> cdf(static_cast<std::size_t>(ns) + 1);
    for (Eigen::Index r = 0; r < b; ++r) {
        const double step = (rays.far[r] - rays.near[r]) / ns;
        double acc = 0.0;
        cdf[0] = 0.0;
        for (int k = 0; k < ns; ++k) {
            const double sigma = sdf_to_density(d[r * ns + k], 1.0 / beta, beta);
            const double w = std::exp(-acc) * (1.0 - std::exp(-sigma * delta(k, r)));
            acc += sigma * delta(k, r);
            cdf[k + 1] = cdf[k] + w + 1e-5;
        }
        for (int j = 0; j < ni; ++j) {
            const double xi = opts.perturb ? u01(rngs[static_cast<std::size_t>(r)]) : 0.5;
            const double target = (j + xi) / ni * cdf[ns];
            const auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), target);
            const int k = std::min<int>(ns - 1, static_cast<int>(it - cdf.begin()) - 1);
            const double span = cdf[k + 1] - cdf[k];
            const double frac = span > 0.0 ? (target - cdf[k]) / span : 0.5;
            out(ns + j, r) = rays.near[r] + (k + std::clamp(frac, 0.0, 1.0)) * step;
        }
        out.block(0, r, ns, 1) = coarse.col(r);
        std::sort(out.col(r).data(), out.col(r).data() + ns + ni);
    }
    return out;
}

RenderOutput render_chunk(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                          const SampleOptions& opts, Eigen::Index first_ray, RenderTape* tape) {
    const Mat t = place_samples(field, rays, opts, first_ray);
    const Mat delta = deltas(t, rays.far);
    FieldEval eval = field.evaluate(sample_points(rays, t), tape != nullptr);
    const double beta = field.beta();
    Mat sigma(t.rows(), t.cols());
    Mat dsd(t.rows(), t.cols());
    Mat dsb(t.rows(), t.cols());
    for (Eigen::Index r = 0; r < t.cols(); ++r)
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            density_partials(eval.sdf[r * t.rows() + i], beta, sigma(i, r), dsd(i, r), dsb(i, r));
    Mat trans;
    RenderOutput out = composite(t, delta, sigma, eval.logits, sky, &trans);
    if (tape) {
        tape->t = t;
        tape->delta = delta;
        tape->dsigma_dd = std::move(dsd);
        tape->dsigma_dbeta = std::move(dsb);
        tape->transmittance = std::move(trans);
        tape->eval = std::move(eval);
        tape->out = out;
    }
    return out;
}

RayBatch slice(const RayBatch& rays, Eigen::Index first, Eigen::Index count) {
    return {rays.origins.middleCols(first, count), rays.directions.middleCols(first, count),
            rays.near.segment(first, count), rays.far.segment(first, count)};
}

void place(RenderOutput& dst, const RenderOutput& src, Eigen::Index first) {
    const Eigen::Index n = src.t_fg.size();
    dst.logit_sum.middleCols(first, n) = src.logit_sum;
    dst.p_fg.middleCols(first, n) = src.p_fg;
    dst.t_fg.segment(first, n) = src.t_fg;
    dst.depth.segment(first, n) = src.depth;
    dst.y.middleCols(first, n) = src.y;
    dst.weights.middleCols(first, n) = src.weights;
    dst.residual.segment(first, n) = src.residual;
}

RenderOutput render_all(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                        const SampleOptions& opts, bool parallel) {
    rays.validate();
    sky.validate();
    opts.validate();
    require(sky.num_classes == field.num_classes(), "sky class count does not match the field");
    const Eigen::Index b = rays.size();
    const int m = field.num_classes();
    RenderOutput out{Mat(m, b), Mat(m, b), Eigen::VectorXd(b), Eigen::VectorXd(b), Mat(m, b),
                     Mat(opts.total(), b), Eigen::VectorXd(b)};
    const Eigen::Index chunks = (b + opts.chunk - 1) / opts.chunk;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index first = c * opts.chunk;
        const Eigen::Index count = std::min<Eigen::Index>(opts.chunk, b - first);
        place(out, render_chunk(field, slice(rays, first, count), sky, opts, first, nullptr), first);
    }
    return out;
}

}  // namespace

Eigen::VectorXd SkySemantics::probabilities() const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(num_classes);
    p[sky_class] = 1.0;
    return p;
}

void SkySemantics::validate() const {
    require(num_classes >= 2 && sky_class >= 0 && sky_class < num_classes, "sky class out of range");
}

void RayBatch::validate() const {
    const Eigen::Index b = size();
    require(directions.cols() == b && near.size() == b && far.size() == b, "ray batch arrays differ in length");
    for (Eigen::Index r = 0; r < b; ++r) {
        require(std::abs(directions.col(r).norm() - 1.0) <= 1e-6, "ray directions must be unit length");
        require(near[r] >= 0.0 && near[r] <= far[r], "ray interval must satisfy 0 <= near <= far");
    }
}

RayBatch RayBatch::from_pixels(const Camera& cam, const std::vector<std::pair<int, int>>& pixels, const Box& bounds) {
    const auto n = static_cast<Eigen::Index>(pixels.size());
    RayBatch rays{Points(3, n), Points(3, n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [x, y] = pixels[static_cast<std::size_t>(i)];
        const Ray ray = cam.pixel_ray(x, y);
        rays.origins.col(i) = ray.origin;
        rays.directions.col(i) = ray.dir;
        double t0 = 0.0;
        double t1 = 0.0;
        if (!bounds.intersect(ray, t0, t1)) t0 = t1 = 0.0;
        rays.near[i] = t0;
        rays.far[i] = t1;
    }
    return rays;
}

RayBatch RayBatch::from_camera(const Camera& cam, const Box& bounds) {
    std::vector<std::pair<int, int>> px;
    px.reserve(static_cast<std::size_t>(cam.height()) * cam.width());
    for (int y = 0; y < cam.height(); ++y)
        for (int x = 0; x < cam.width(); ++x) px.emplace_back(x, y);
    return from_pixels(cam, px, bounds);
}

void SampleOptions::validate() const {
    require(stratified > 0 && importance >= 0 && chunk > 0, "sample counts must be positive");
}

RenderOutput composite(const Mat& t, const Mat& delta, const Mat& sigma, const Mat& logits_per_sample,
                       const SkySemantics& sky, Mat* transmittance) {
    const Eigen::Index s = t.rows();
    const Eigen::Index b = t.cols();
    const Eigen::Index m = logits_per_sample.rows();
    const Eigen::VectorXd p_sky = sky.probabilities();
    RenderOutput out{Mat::Zero(m, b), Mat(m, b), Eigen::VectorXd(b), Eigen::VectorXd(b), Mat(m, b),
                     Mat(s, b), Eigen::VectorXd(b)};
    if (transmittance) transmittance->resize(s + 1, b);
    for (Eigen::Index r = 0; r < b; ++r) {
        double acc = 0.0;
        double opacity = 0.0;
        double depth = 0.0;
        for (Eigen::Index i = 0; i < s; ++i) {
            const double ti = std::exp(-acc);
            acc += sigma(i, r) * delta(i, r);
            const double w = ti - std::exp(-acc);
            if (transmittance) (*transmittance)(i, r) = ti;
            out.weights(i, r) = w;
            opacity += w;
            depth += w * t(i, r);
            out.logit_sum.col(r) += w * logits_per_sample.col(r * s + i);
        }
        const double residual = std::exp(-acc);
        if (transmittance) (*transmittance)(s, r) = residual;
        out.residual[r] = residual;
        out.t_fg[r] = opacity;
        out.depth[r] = depth;
        const Eigen::VectorXd z = out.logit_sum.col(r).array() - out.logit_sum.col(r).maxCoeff();
        const Eigen::VectorXd e = z.array().exp();
        out.p_fg.col(r) = e / e.sum();
        out.y.col(r) = opacity * out.p_fg.col(r) + (1.0 - opacity) * p_sky;
    }
    return out;
}

RenderOutput render_rays(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                         const SampleOptions& opts) {
    return render_all(field, rays, sky, opts, true);
}

RenderOutput render_rays_serial(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                                const SampleOptions& opts) {
    return render_all(field, rays, sky, opts, false);
}

RenderOutput render_with_tape(const SemanticField& field, const RayBatch& rays, const SkySemantics& sky,
                              const SampleOptions& opts, RenderTape& tape) {
    rays.validate();
    opts.validate();
    require(sky.num_classes == field.num_classes(), "sky class count does not match the field");
    return render_chunk(field, rays, sky, opts, 0, &tape);
}

void render_backward(SemanticField& field, const SkySemantics& sky, const RenderTape& tape, const Mat& dy,
                     const Eigen::VectorXd& dt_fg, const Eigen::VectorXd& ddepth) {
    const RenderOutput& o = tape.out;
    const Eigen::Index s = tape.t.rows();
    const Eigen::Index b = tape.t.cols();
    const Eigen::VectorXd p_sky = sky.probabilities();
    Eigen::RowVectorXd dsdf(s * b);
    Mat dlogits(o.p_fg.rows(), s * b);
    double dbeta = 0.0;
    std::vector<double> c(static_cast<std::size_t>(s));
    for (Eigen::Index r = 0; r < b; ++r) {
        const Eigen::VectorXd p = o.p_fg.col(r);
        const Eigen::VectorXd dp = o.t_fg[r] * dy.col(r);
        const double dt = dt_fg[r] + (p - p_sky).dot(dy.col(r));
        const Eigen::VectorXd ds = p.cwiseProduct((dp.array() - dp.dot(p)).matrix());
        for (Eigen::Index i = 0; i < s; ++i) {
            const Eigen::Index col = r * s + i;
            c[static_cast<std::size_t>(i)] = ds.dot(tape.eval.logits.col(col)) + ddepth[r] * tape.t(i, r) + dt;
            dlogits.col(col) = o.weights(i, r) * ds;
        }
        // dL/dtau_k = c_k T_{k+1} - sum_{i>k} c_i w_i
        double tail = 0.0;
        for (Eigen::Index k = s - 1; k >= 0; --k) {
            const double dtau = c[static_cast<std::size_t>(k)] * tape.transmittance(k + 1, r) - tail;
            tail += c[static_cast<std::size_t>(k)] * o.weights(k, r);
            const double dsigma = dtau * tape.delta(k, r);
            dsdf[r * s + k] = dsigma * tape.dsigma_dd(k, r);
            dbeta += dsigma * tape.dsigma_dbeta(k, r);
        }
    }
    field.backward(tape.eval, dsdf, dlogits);
    field.params()[field.beta_index()].grad[0] += dbeta * field.beta_slope();
}

}  // namespace semscene::semfield
