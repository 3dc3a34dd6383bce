// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "semscene/appearance/appearance.hpp"
#include "semscene/common/error.hpp"

namespace semscene::appearance {

void TrainConfig::validate() const {
    field.validate();
    require(iterations >= 0 && log_every > 0 && disc_width >= 1, "appearance training sizes must be positive");
    require(learning_rate >= 0.0 && disc_learning_rate >= 0.0, "learning rates must be non-negative");
    require(w_adv >= 0.0 && w_l2 >= 0.0 && w_perc >= 0.0, "loss weights must be non-negative");
}

std::vector<AppearanceView> make_appearance_views(const adapters::SynthesizerAdapter& synth,
                                                  const std::vector<Camera>& cameras,
                                                  const std::vector<SemanticMask>& masks, std::uint64_t style_seed) {
    require(cameras.size() == masks.size(), "one mask per camera expected");
    std::vector<AppearanceView> views;
    for (std::size_t i = 0; i < cameras.size(); ++i)
        views.push_back({cameras[i], masks[i], synth.synthesize(masks[i], style_seed)});
    return views;
}

AppearanceField train_appearance(const kernels::Bvh& bvh, const std::vector<AppearanceView>& views,
                                 const TrainConfig& cfg, TrainLog* log) {
    cfg.validate();
    require(!views.empty(), "appearance training needs at least one view");
    const int m = views[0].mask.num_classes();
    std::vector<SurfaceHits> hits;
    std::vector<FeatureMap> targets;
    for (const AppearanceView& v : views) {
        require(v.mask.num_classes() == m && !v.mask.has_holes(), "view masks must be hole-free with one class count");
        require(v.target.height() == v.camera.height() && v.target.width() == v.camera.width() &&
                    v.mask.height() == v.camera.height() && v.mask.width() == v.camera.width(),
                "view images must match their camera");
        hits.push_back(surface_intersect(bvh, v.camera));
        targets.push_back(to_feature_map(v.target));
    }

    AppearanceField field(cfg.field);
    nn::Adam adam(field.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
    Discriminator disc(m, cfg.disc_width, cfg.seed + 1);
    nn::Adam disc_adam(disc.params(), {cfg.disc_learning_rate, 0.0, 0.999, 1e-8});
    std::mt19937_64 rng(cfg.seed * 0x2545F4914F6CDD1DULL + 3);
    std::uniform_int_distribution<std::size_t> pick(0, views.size() - 1);

    double window = 0.0;
    int in_window = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        const std::size_t vi = pick(rng);
        AppearanceField::ColorCache cache;
        const FeatureMap rendered = render_hits(field, hits[vi], &cache);
        FeatureMap grad;
        FeatureMap part;
        double loss = cfg.w_l2 * l2_loss(rendered, targets[vi], &grad);
        for (double& g : grad.data) g *= cfg.w_l2;
        if (cfg.w_perc > 0.0) {
            loss += cfg.w_perc * perceptual_loss(rendered, targets[vi], &part);
            for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += cfg.w_perc * part.data[i];
        }
        if (cfg.w_adv > 0.0) {
            disc.params().zero_grad();
            const AdversarialLosses adv = adversarial_step(disc, rendered, targets[vi], views[vi].mask, &part);
            loss += cfg.w_adv * adv.gen;
            for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += cfg.w_adv * part.data[i];
            disc_adam.step(disc.params());
        }
        if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, "appearance loss is not finite");
        field.params().zero_grad();
        render_hits_backward(field, hits[vi], cache, grad);
        adam.step(field.params());

        window += loss;
        if (++in_window == cfg.log_every) {
            if (log) log->losses.push_back(window / in_window);
            window = 0.0;
            in_window = 0;
        }
    }
    return field;
}

double psnr(const ColorImage& a, const ColorImage& b) {
    require(a.height() == b.height() && a.width() == b.width(), "image sizes differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    return mse <= 1e-10 ? 100.0 : -10.0 * std::log10(mse);
}

double reprojected_color_difference(const std::vector<ColorImage>& images, const std::vector<DepthMap>& depths,
                                    const std::vector<Camera>& cameras, double rel_tol) {
    require(images.size() == depths.size() && images.size() == cameras.size() && images.size() >= 2,
            "need at least two views with depth and camera");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < images.size(); ++i) {
        for (std::size_t j = 0; j < images.size(); ++j) {
            if (i == j) continue;
            const Camera& ci = cameras[i];
            const Camera& cj = cameras[j];
            for (int y = 0; y < ci.height(); ++y)
                for (int x = 0; x < ci.width(); ++x) {
                    if (!depths[i].valid(y, x)) continue;
                    const Eigen::Vector3d p = cj.project(ci.unproject(x + 0.5, y + 0.5, depths[i].value(y, x)));
                    if (p.z() <= 0.0) continue;
                    const int u = static_cast<int>(std::floor(p.x()));
                    const int v = static_cast<int>(std::floor(p.y()));
                    if (u < 0 || v < 0 || u >= cj.width() || v >= cj.height() || !depths[j].valid(v, u)) continue;
                    if (std::abs(depths[j].value(v, u) - p.z()) > rel_tol * p.z()) continue;
                    double d = 0.0;
                    for (int c = 0; c < 3; ++c) d += std::abs(images[i](y, x, c) - images[j](v, u, c));
                    diffs.push_back(d / 3.0);
                }
        }
    }
    if (diffs.empty()) fail(ErrorKind::kUndefinedMetric, "no co-visible pixels between views");
    const auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    return *mid;
}

}  // namespace semscene::appearance
