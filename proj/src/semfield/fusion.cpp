// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/semfield/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "semscene/common/error.hpp"

namespace semscene::semfield {

namespace {

struct ViewStats {
    double tau = 0.0;
};

double median_fg_depth(const FusionView& v, int sky) {
    std::vector<double> d;
    for (int y = 0; y < v.mask.height(); ++y)
        for (int x = 0; x < v.mask.width(); ++x)
            if (v.mask(y, x) != sky && v.depth.valid(y, x)) d.push_back(v.depth.value(y, x));
    if (d.empty()) return 1.0;
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid;
}

}  // namespace

void FusionConfig::validate() const {
    field.validate();
    weights.validate();
    sampling.validate();
    require(rays_per_iteration >= 2 && iterations >= 0 && eikonal_points >= 0 && rank_pairs >= 0,
            "fusion batch sizes must be positive");
    require(learning_rate >= 0.0, "learning rate must be non-negative");
    require(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0, "final learning-rate fraction must be in (0, 1]");
    require(log_every > 0, "log interval must be positive");
    require(sky_class >= 0 && sky_class < field.num_classes, "sky class out of range");
}

SemanticField train_semantic_field(const std::vector<FusionView>& views, const FusionConfig& cfg, FusionLog* log,
                                   const SemanticField* init) {
    cfg.validate();
    require(!views.empty(), "semantic field fusion needs at least one view");
    const int m = cfg.field.num_classes;
    std::vector<ViewStats> stats;
    for (const FusionView& v : views) {
        require(v.mask.num_classes() == m, "view class count does not match the field");
        require(!v.mask.has_holes(), "supervising masks must be hole-free");
        const int h = v.mask.height();
        const int w = v.mask.width();
        require(v.camera.height() == h && v.camera.width() == w, "camera size differs from its mask");
        require(v.depth.height() == h && v.depth.width() == w, "depth size differs from its mask");
        require(v.src_depth.height() == h && v.src_depth.width() == w, "source depth size differs from its mask");
        stats.push_back({cfg.weights.tau_fraction * median_fg_depth(v, cfg.sky_class)});
    }

    SemanticField field = init ? *init : SemanticField(cfg.field, cfg.seed);
    if (!init && cfg.init_iterations > 0) field.init_plane(cfg.init_height, cfg.init_iterations, cfg.seed + 17);
    const SkySemantics sky{m, cfg.sky_class};
    const LossWeights& lw = cfg.weights;
    nn::Adam adam(field.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 101);
    std::uniform_int_distribution<std::size_t> pick_view(0, views.size() - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);
    const Box& box = cfg.field.bounds;
    const int nrays = cfg.rays_per_iteration;

    double window = 0.0;
    LossComponents window_parts;
    int in_window = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        const std::size_t vi = pick_view(rng);
        const FusionView& view = views[vi];
        std::uniform_int_distribution<int> px(0, view.mask.width() - 1);
        std::uniform_int_distribution<int> py(0, view.mask.height() - 1);
        std::vector<std::pair<int, int>> pixels(static_cast<std::size_t>(nrays));
        for (auto& p : pixels) {
            p.first = px(rng);
            p.second = py(rng);
        }
        const RayBatch rays = RayBatch::from_pixels(view.camera, pixels, box);
        const Eigen::Vector3d fwd = view.camera.forward();

        Mat target = Mat::Zero(m, nrays);
        Eigen::VectorXd zscale(nrays);
        Eigen::VectorXd dhat = Eigen::VectorXd::Zero(nrays);
        Eigen::VectorXd dsrc = Eigen::VectorXd::Zero(nrays);
        Mask fg(static_cast<std::size_t>(nrays), 0);
        Mask src_valid(static_cast<std::size_t>(nrays), 0);
        for (int r = 0; r < nrays; ++r) {
            const auto [x, y] = pixels[static_cast<std::size_t>(r)];
            const int label = view.mask(y, x);
            target(label, r) = 1.0;
            zscale[r] = rays.directions.col(r).dot(fwd);
            if (label != cfg.sky_class && view.depth.valid(y, x)) {
                fg[static_cast<std::size_t>(r)] = 1;
                dhat[r] = view.depth.value(y, x);
            }
            if (view.src_depth.valid(y, x)) {
                src_valid[static_cast<std::size_t>(r)] = 1;
                dsrc[r] = view.src_depth.value(y, x);
            }
        }

        SampleOptions so = cfg.sampling;
        so.perturb = true;
        so.seed = rng();
        RenderTape tape;
        const RenderOutput out = render_with_tape(field, rays, sky, so, tape);
        const Eigen::VectorXd dz = out.depth.cwiseProduct(zscale);

        LossComponents parts;
        Mat dy;
        parts.sem = semantic_loss(out.y, target, lw.eps, &dy);
        Eigen::VectorXd dtrans;
        parts.trans = transmittance_loss(out.t_fg, lw.eps, &dtrans);
        Eigen::VectorXd ddepth = Eigen::VectorXd::Zero(nrays);
        try {
            Eigen::VectorXd g;
            parts.depth = depth_loss(dz, dhat, fg, &g);
            ddepth += lw.depth * g;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kDegenerateInput) throw;
        }
        {
            Eigen::VectorXd g;
            const auto pairs = sample_rank_pairs(dhat, fg, stats[vi].tau, cfg.rank_pairs, rng());
            parts.rank = ranking_loss(dz, pairs, &g);
            ddepth += lw.rank * g;
        }
        {
            Eigen::VectorXd g;
            parts.src = src_depth_loss(dz, dsrc, src_valid, &g);
            ddepth += lw.src * g;
        }

        field.params().zero_grad();
        if (cfg.eikonal_points > 0) {
            Points pts(3, cfg.eikonal_points);
            int k = 0;
            for (int r = 0; r < nrays && k < cfg.eikonal_points / 2; ++r) {
                if (!fg[static_cast<std::size_t>(r)] || out.t_fg[r] < 0.5) continue;
                const double t = out.depth[r] / out.t_fg[r] + 0.05 * jitter(rng);
                pts.col(k++) = rays.origins.col(r) + t * rays.directions.col(r);
            }
            for (; k < cfg.eikonal_points; ++k)
                for (int a = 0; a < 3; ++a) pts(a, k) = box.lo[a] + u01(rng) * (box.hi[a] - box.lo[a]);
            parts.eik = field.eikonal(pts, lw.eik);
        }
        render_backward(field, sky, tape, lw.sem * dy, lw.trans * dtrans, ddepth.cwiseProduct(zscale));
        adam.config().lr = cfg.learning_rate *
                           std::pow(cfg.final_lr_fraction, static_cast<double>(it) / std::max(1, cfg.iterations - 1));
        adam.step(field.params());

        window += total_loss(parts, lw);
        window_parts.depth += parts.depth;
        window_parts.trans += parts.trans;
        window_parts.sem += parts.sem;
        window_parts.eik += parts.eik;
        window_parts.rank += parts.rank;
        window_parts.src += parts.src;
        if (++in_window == cfg.log_every) {
            if (log) {
                const double inv = 1.0 / in_window;
                log->losses.push_back(window * inv);
                log->components.push_back({window_parts.depth * inv, window_parts.trans * inv, window_parts.sem * inv,
                                           window_parts.eik * inv, window_parts.rank * inv, window_parts.src * inv});
            }
            window = 0.0;
            window_parts = {};
            in_window = 0;
        }
    }
    field.params().zero_grad();
    return field;
}

std::vector<std::pair<SemanticMask, DepthMap>> render_semantic_views(const SemanticField& field,
                                                                     const std::vector<Camera>& cameras,
                                                                     const SkySemantics& sky,
                                                                     const SampleOptions& opts) {
    SampleOptions so = opts;
    so.perturb = false;
    std::vector<std::pair<SemanticMask, DepthMap>> views;
    for (const Camera& cam : cameras) {
        const RayBatch rays = RayBatch::from_camera(cam, field.config().bounds);
        const RenderOutput out = render_rays(field, rays, sky, so);
        SemanticMask mask(cam.height(), cam.width(), field.num_classes());
        DepthMap depth(cam.height(), cam.width());
        const Eigen::Vector3d fwd = cam.forward();
        for (int y = 0; y < cam.height(); ++y) {
            for (int x = 0; x < cam.width(); ++x) {
                const Eigen::Index r = static_cast<Eigen::Index>(y) * cam.width() + x;
                Eigen::Index best = 0;
                out.y.col(r).maxCoeff(&best);
                mask(y, x) = static_cast<Label>(best);
                const double z = out.depth[r] * rays.directions.col(r).dot(fwd);
                if (out.t_fg[r] > 0.5 && z > 0.0) depth.set(y, x, static_cast<float>(z));
            }
        }
        views.emplace_back(std::move(mask), std::move(depth));
    }
    return views;
}

}  // namespace semscene::semfield
