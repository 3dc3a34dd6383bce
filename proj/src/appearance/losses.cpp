// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "semscene/appearance/appearance.hpp"
#include "semscene/common/error.hpp"

namespace semscene::appearance {

namespace {

struct Plane {
    int h = 0;
    int w = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

struct Tap {
    int dy;
    int dx;
    double w;
};

// out[p] = sum_t w_t in[clamp(p + o_t)]; the adjoint scatters along the same taps.
Plane stencil(const Plane& in, const std::vector<Tap>& taps, bool adjoint) {
    Plane out(in.h, in.w);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x)
            for (const Tap& t : taps) {
                const int yy = std::clamp(y + t.dy, 0, in.h - 1);
                const int xx = std::clamp(x + t.dx, 0, in.w - 1);
                if (adjoint) out.at(yy, xx) += t.w * in.at(y, x);
                else out.at(y, x) += t.w * in.at(yy, xx);
            }
    return out;
}

const std::vector<Tap>& blur_x() {
    static const std::vector<Tap> t{{0, -2, 1 / 16.0}, {0, -1, 4 / 16.0}, {0, 0, 6 / 16.0}, {0, 1, 4 / 16.0}, {0, 2, 1 / 16.0}};
    return t;
}
const std::vector<Tap>& blur_y() {
    static const std::vector<Tap> t{{-2, 0, 1 / 16.0}, {-1, 0, 4 / 16.0}, {0, 0, 6 / 16.0}, {1, 0, 4 / 16.0}, {2, 0, 1 / 16.0}};
    return t;
}
const std::vector<Tap>& sobel_x() {
    static const std::vector<Tap> t{{-1, -1, -1 / 8.0}, {0, -1, -2 / 8.0}, {1, -1, -1 / 8.0},
                                    {-1, 1, 1 / 8.0},   {0, 1, 2 / 8.0},   {1, 1, 1 / 8.0}};
    return t;
}
const std::vector<Tap>& sobel_y() {
    static const std::vector<Tap> t{{-1, -1, -1 / 8.0}, {-1, 0, -2 / 8.0}, {-1, 1, -1 / 8.0},
                                    {1, -1, 1 / 8.0},   {1, 0, 2 / 8.0},   {1, 1, 1 / 8.0}};
    return t;
}

Plane reduce(const Plane& in) {
    const Plane b = stencil(stencil(in, blur_x(), false), blur_y(), false);
    Plane out((in.h + 1) / 2, (in.w + 1) / 2);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) out.at(y, x) = b.at(2 * y, 2 * x);
    return out;
}

Plane reduce_adjoint(const Plane& g, int h, int w) {
    Plane up(h, w);
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) up.at(2 * y, 2 * x) = g.at(y, x);
    return stencil(stencil(up, blur_y(), true), blur_x(), true);
}

std::vector<Plane> channels(const FeatureMap& img) {
    std::vector<Plane> out;
    for (int c = 0; c < img.c; ++c) {
        Plane p(img.h, img.w);
        std::copy_n(img.image(0) + c * img.plane(), img.plane(), p.v.begin());
        out.push_back(std::move(p));
    }
    return out;
}

void check_pair(const FeatureMap& a, const FeatureMap& b) {
    require(a.n == 1 && b.n == 1 && a.c == b.c && a.h == b.h && a.w == b.w, "image shapes differ");
}

}  // namespace

double l2_loss(const FeatureMap& a, const FeatureMap& b, FeatureMap* grad_a) {
    check_pair(a, b);
    const double n = static_cast<double>(a.data.size());
    double sum = 0.0;
    if (grad_a) *grad_a = FeatureMap(a.n, a.c, a.h, a.w);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
        if (grad_a) grad_a->data[i] = 2.0 * d / n;
    }
    return sum / n;
}

std::vector<FeatureMap> perceptual_features(const FeatureMap& img, int levels) {
    require(img.n == 1 && levels >= 1, "perceptual features need one image and at least one level");
    std::vector<FeatureMap> out;
    std::vector<Plane> cur = channels(img);
    for (int l = 0; l < levels; ++l) {
        const int h = cur[0].h;
        const int w = cur[0].w;
        FeatureMap f(1, 3 * img.c, h, w);
        for (int c = 0; c < img.c; ++c) {
            const Plane parts[3] = {cur[c], stencil(cur[c], sobel_x(), false), stencil(cur[c], sobel_y(), false)};
            for (int k = 0; k < 3; ++k)
                std::copy(parts[k].v.begin(), parts[k].v.end(), f.image(0) + (3 * c + k) * f.plane());
        }
        out.push_back(std::move(f));
        if (l + 1 < levels)
            for (Plane& p : cur) p = reduce(p);
    }
    return out;
}

double perceptual_loss(const FeatureMap& a, const FeatureMap& b, FeatureMap* grad_a, int levels) {
    check_pair(a, b);
    FeatureMap diff(1, a.c, a.h, a.w);
    for (std::size_t i = 0; i < a.data.size(); ++i) diff.data[i] = a.data[i] - b.data[i];

    // The extractor is linear, so features of the difference suffice.
    std::vector<std::vector<Plane>> pyramid{channels(diff)};
    for (int l = 1; l < levels; ++l) {
        std::vector<Plane> next;
        for (const Plane& p : pyramid.back()) next.push_back(reduce(p));
        pyramid.push_back(std::move(next));
    }
    double loss = 0.0;
    std::vector<std::vector<Plane>> local(static_cast<std::size_t>(levels));
    for (int l = 0; l < levels; ++l) {
        const auto& lv = pyramid[static_cast<std::size_t>(l)];
        const double n = 3.0 * a.c * lv[0].h * lv[0].w;
        for (const Plane& p : lv) {
            const Plane sx = stencil(p, sobel_x(), false);
            const Plane sy = stencil(p, sobel_y(), false);
            for (std::size_t i = 0; i < p.v.size(); ++i)
                loss += (p.v[i] * p.v[i] + sx.v[i] * sx.v[i] + sy.v[i] * sy.v[i]) / n;
            if (!grad_a) continue;
            Plane g = stencil(sx, sobel_x(), true);
            const Plane gy = stencil(sy, sobel_y(), true);
            for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] = 2.0 * (p.v[i] + g.v[i] + gy.v[i]) / n;
            local[static_cast<std::size_t>(l)].push_back(std::move(g));
        }
    }
    if (grad_a) {
        std::vector<Plane> g = local.back();
        for (int l = levels - 2; l >= 0; --l) {
            std::vector<Plane>& here = local[static_cast<std::size_t>(l)];
            for (std::size_t c = 0; c < here.size(); ++c) {
                const Plane up = reduce_adjoint(g[c], here[c].h, here[c].w);
                for (std::size_t i = 0; i < up.v.size(); ++i) here[c].v[i] += up.v[i];
            }
            g = here;
        }
        *grad_a = FeatureMap(1, a.c, a.h, a.w);
        for (int c = 0; c < a.c; ++c)
            std::copy(g[static_cast<std::size_t>(c)].v.begin(), g[static_cast<std::size_t>(c)].v.end(),
                      grad_a->image(0) + c * grad_a->plane());
    }
    return loss;
}

Discriminator::Discriminator(int num_classes, int width, std::uint64_t seed) : num_classes_(num_classes) {
    require(num_classes >= 1 && width >= 1, "discriminator sizes must be positive");
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0xD15C);
    c0_ = nn::add_conv(params_, "disc0", 3, width, 3, 1, rng);
    c1_ = nn::add_conv(params_, "disc1", width, width, 3, 1, rng);
    c2_ = nn::add_conv(params_, "disc2", width, num_classes + 1, 1, 1, rng);
}

FeatureMap Discriminator::forward(const FeatureMap& img, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x = img;
    c.a0 = nn::conv_forward(params_, c0_, c.x);
    c.h0 = nn::leaky_relu(c.a0);
    c.a1 = nn::conv_forward(params_, c1_, c.h0);
    c.h1 = nn::leaky_relu(c.a1);
    return nn::conv_forward(params_, c2_, c.h1);
}

FeatureMap Discriminator::backward(const Cache& c, const FeatureMap& dlogits) {
    FeatureMap g = nn::conv_backward(params_, c2_, c.h1, dlogits);
    g = nn::conv_backward(params_, c1_, c.h0, nn::leaky_relu_backward(c.a1, g));
    return nn::conv_backward(params_, c0_, c.x, nn::leaky_relu_backward(c.a0, g));
}

double pixel_cross_entropy(const FeatureMap& logits, const std::vector<int>& labels, FeatureMap* dlogits) {
    require(logits.n == 1 && labels.size() == logits.plane(), "one label per pixel expected");
    const std::size_t plane = logits.plane();
    const double n = static_cast<double>(plane);
    const double floor_log = std::log(kProbabilityFloor);
    if (dlogits) *dlogits = FeatureMap(1, logits.c, logits.h, logits.w);
    double loss = 0.0;
    std::vector<double> p(static_cast<std::size_t>(logits.c));
    for (std::size_t i = 0; i < plane; ++i) {
        const int label = labels[i];
        require(label >= 0 && label < logits.c, "pixel label out of range");
        double m = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < logits.c; ++k) m = std::max(m, logits.data[k * plane + i]);
        double sum = 0.0;
        for (int k = 0; k < logits.c; ++k) sum += (p[k] = std::exp(logits.data[k * plane + i] - m));
        const double logp = logits.data[label * plane + i] - m - std::log(sum);
        if (logp < floor_log) {
            loss -= floor_log;
            continue;
        }
        loss -= logp;
        if (!dlogits) continue;
        for (int k = 0; k < logits.c; ++k) dlogits->data[k * plane + i] = (p[k] / sum - (k == label ? 1.0 : 0.0)) / n;
    }
    return loss / n;
}

AdversarialLosses adversarial_step(Discriminator& disc, const FeatureMap& rendered, const FeatureMap& pseudo_gt,
                                   const SemanticMask& mask, FeatureMap* d_rendered) {
    check_pair(rendered, pseudo_gt);
    require(mask.height() == rendered.h && mask.width() == rendered.w, "mask size differs from the images");
    require(!mask.has_holes() && mask.num_classes() == disc.num_classes(), "mask must be hole-free and match the discriminator");
    std::vector<int> real(mask.pixels());
    for (std::size_t i = 0; i < real.size(); ++i) real[i] = mask[i];
    const std::vector<int> fake(mask.pixels(), disc.fake_class());

    AdversarialLosses out;
    Discriminator::Cache cache;
    FeatureMap dl;
    out.gen = pixel_cross_entropy(disc.forward(rendered, &cache), real, d_rendered ? &dl : nullptr);
    if (d_rendered) {
        const std::vector<double> saved = disc.params().flat_grads();
        *d_rendered = disc.backward(cache, dl);
        std::size_t k = 0;
        for (auto& t : disc.params().tensors())
            for (double& g : t.grad) g = saved[k++];
    }
    out.disc = pixel_cross_entropy(disc.forward(pseudo_gt, &cache), real, &dl);
    disc.backward(cache, dl);
    out.disc += pixel_cross_entropy(disc.forward(rendered, &cache), fake, &dl);
    disc.backward(cache, dl);
    return out;
}

}  // namespace semscene::appearance
