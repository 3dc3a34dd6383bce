// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/inpaint/inpainter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "semscene/common/error.hpp"

namespace semscene::inpaint {

using nn::FeatureMap;

namespace {

constexpr const char* kMetaName = "inpainter.meta";

void add_into(FeatureMap& a, const FeatureMap& b) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

// Log-softmax cross-entropy over channels for one pixel of one image.
double pixel_ce(const FeatureMap& logits, int n, int y, int x, Label target, FeatureMap* grad, double scale) {
    const int m = logits.c;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < m; ++c) mx = std::max(mx, logits.at(n, c, y, x));
    double sum = 0.0;
    for (int c = 0; c < m; ++c) sum += std::exp(logits.at(n, c, y, x) - mx);
    const double lse = mx + std::log(sum);
    if (grad) {
        for (int c = 0; c < m; ++c) {
            const double p = std::exp(logits.at(n, c, y, x) - lse);
            grad->at(n, c, y, x) = scale * (p - (c == target ? 1.0 : 0.0));
        }
    }
    return lse - logits.at(n, target, y, x);
}

}  // namespace

void InpaintConfig::validate() const {
    require(resolution > 0 && resolution % 4 == 0, "inpaint resolution must be a positive multiple of 4");
    require(batch_size > 0 && iterations > 0 && log_every > 0, "inpaint batch/iterations must be positive");
    require(learning_rate >= 0.0, "learning rate must be non-negative");
    require(widths[0] > 0 && widths[1] > 0 && widths[2] > 0, "inpaint widths must be positive");
}

Inpainter::Inpainter(int num_classes, const std::array<int, 3>& widths, std::uint64_t seed)
    : num_classes_(num_classes), widths_(widths) {
    require(num_classes >= 2, "inpainter needs at least two classes");
    build(seed);
}

void Inpainter::build(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xA5A5F00DULL);
    const int m = num_classes_;
    const auto [c1, c2, c3] = widths_;
    params_ = nn::ParamStore();
    convs_.clear();
    convs_.push_back(nn::add_conv(params_, "enc1a", m + 1, c1, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "enc1b", c1, c1, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "enc2a", c1, c2, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "enc2b", c2, c2, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "enc3a", c2, c3, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "enc3b", c3, c3, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "dec2", c3 + c2, c2, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "dec1", c2 + c1, c1, 3, 1, rng));
    convs_.push_back(nn::add_conv(params_, "head", c1, m, 1, 1, rng));
}

Inpainter Inpainter::load(const std::filesystem::path& path) {
    nn::ParamStore stored = nn::load_checkpoint(path);
    const int meta = stored.find(kMetaName);
    if (meta < 0 || stored[meta].size() != 4) fail(ErrorKind::kFormat, "not an inpainter checkpoint: " + path.string());
    Inpainter model;
    model.num_classes_ = static_cast<int>(stored[meta].value[0]);
    model.widths_ = {static_cast<int>(stored[meta].value[1]), static_cast<int>(stored[meta].value[2]),
                     static_cast<int>(stored[meta].value[3])};
    model.build(0);
    for (auto& t : model.params_.tensors()) {
        const int i = stored.find(t.name);
        if (i < 0 || stored[i].shape != t.shape) fail(ErrorKind::kFormat, "inpainter checkpoint lacks " + t.name);
        t.value = stored[i].value;
    }
    return model;
}

void Inpainter::save(const std::filesystem::path& path) const {
    nn::ParamStore out = params_;
    const int meta = out.add(kMetaName, {4});
    out[meta].value = {static_cast<double>(num_classes_), static_cast<double>(widths_[0]),
                       static_cast<double>(widths_[1]), static_cast<double>(widths_[2])};
    nn::save_checkpoint(path, out);
}

FeatureMap Inpainter::encode(const std::vector<const SemanticMask*>& masks) const {
    require(!masks.empty(), "encode: empty batch");
    const int h = masks.front()->height();
    const int w = masks.front()->width();
    require(h % 4 == 0 && w % 4 == 0, "inpainter input sides must be multiples of 4");
    FeatureMap x(static_cast<int>(masks.size()), num_classes_ + 1, h, w);
    for (int n = 0; n < x.n; ++n) {
        const SemanticMask& m = *masks[static_cast<std::size_t>(n)];
        require(m.num_classes() == num_classes_, "mask class count does not match the inpainter");
        require(m.height() == h && m.width() == w, "batch masks must share a shape");
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const Label l = m(y, xx);
                // HOLE lands on the indicator channel M_s.
                x.at(n, std::clamp<Label>(l, 0, num_classes_), y, xx) = 1.0;
            }
        }
    }
    return x;
}

FeatureMap Inpainter::forward(const FeatureMap& input, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.pre.assign(8, {});
    c.post.assign(9, {});
    auto stage = [&](int i, const FeatureMap& in) {
        c.post[i] = in;
        c.pre[i] = nn::conv_forward(params_, convs_[i], in);
        return nn::leaky_relu(c.pre[i]);
    };
    const FeatureMap h0 = stage(0, input);
    const FeatureMap s1 = stage(1, h0);
    const FeatureMap h2 = stage(2, nn::avg_pool2(s1));
    const FeatureMap s2 = stage(3, h2);
    const FeatureMap h4 = stage(4, nn::avg_pool2(s2));
    const FeatureMap h5 = stage(5, h4);
    const FeatureMap h6 = stage(6, nn::concat_channels(nn::upsample2(h5), s2));
    const FeatureMap h7 = stage(7, nn::concat_channels(nn::upsample2(h6), s1));
    c.post[8] = h7;
    FeatureMap logits = nn::conv_forward(params_, convs_[8], h7);
    if (!cache) c = Cache{};
    return logits;
}

void Inpainter::backward(const Cache& c, const FeatureMap& dlogits) {
    const int c2 = widths_[1];
    const int c3 = widths_[2];
    auto act_back = [&](int i, const FeatureMap& dout) { return nn::leaky_relu_backward(c.pre[i], dout); };
    const FeatureMap dh7 = nn::conv_backward(params_, convs_[8], c.post[8], dlogits);
    const FeatureMap dc1 = nn::conv_backward(params_, convs_[7], c.post[7], act_back(7, dh7));
    FeatureMap du1;
    FeatureMap ds1;
    nn::split_channels(dc1, c2, du1, ds1);
    const FeatureMap dc2 = nn::conv_backward(params_, convs_[6], c.post[6], act_back(6, nn::upsample2_backward(du1)));
    FeatureMap du2;
    FeatureMap ds2;
    nn::split_channels(dc2, c3, du2, ds2);
    const FeatureMap dh4 = nn::conv_backward(params_, convs_[5], c.post[5], act_back(5, nn::upsample2_backward(du2)));
    const FeatureMap dp2 = nn::conv_backward(params_, convs_[4], c.post[4], act_back(4, dh4));
    add_into(ds2, nn::avg_pool2_backward(dp2, ds2.h, ds2.w));
    const FeatureMap dh2 = nn::conv_backward(params_, convs_[3], c.post[3], act_back(3, ds2));
    const FeatureMap dp1 = nn::conv_backward(params_, convs_[2], c.post[2], act_back(2, dh2));
    add_into(ds1, nn::avg_pool2_backward(dp1, ds1.h, ds1.w));
    const FeatureMap dh0 = nn::conv_backward(params_, convs_[1], c.post[1], act_back(1, ds1));
    nn::conv_backward(params_, convs_[0], c.post[0], act_back(0, dh0));
}

SemanticMask resize_nearest(const SemanticMask& mask, int height, int width) {
    if (mask.height() == height && mask.width() == width) return mask;
    SemanticMask out(height, width, mask.num_classes());
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / width));
            out(y, x) = mask(sy, sx);
        }
    }
    return out;
}

SemanticMask inpaint(const Inpainter& model, const SemanticMask& mask) {
    require(mask.num_classes() == model.num_classes(), "inpaint: class count mismatch with the model");
    const int h = (mask.height() + 3) / 4 * 4;
    const int w = (mask.width() + 3) / 4 * 4;
    const SemanticMask net_in = resize_nearest(mask, h, w);
    const FeatureMap logits = model.forward(model.encode({&net_in}), nullptr);
    SemanticMask out(h, w, mask.num_classes());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = 0;
            for (int c = 1; c < logits.c; ++c) {
                if (logits.at(0, c, y, x) > logits.at(0, best, y, x)) best = c;
            }
            out(y, x) = best;
        }
    }
    SemanticMask filled = resize_nearest(out, mask.height(), mask.width());
    for (std::size_t i = 0; i < filled.pixels(); ++i)
        if (mask[i] != mask.hole()) filled[i] = mask[i];
    return filled;
}

double inpaint_loss(const FeatureMap& logits, const std::vector<const SemanticMask*>& targets, FeatureMap* grad) {
    require(static_cast<int>(targets.size()) == logits.n, "inpaint_loss: one target per batch item");
    if (grad) *grad = FeatureMap(logits.n, logits.c, logits.h, logits.w);
    const double count = static_cast<double>(logits.n) * logits.h * logits.w;
    double total = 0.0;
    for (int n = 0; n < logits.n; ++n) {
        const SemanticMask& t = *targets[static_cast<std::size_t>(n)];
        require(t.height() == logits.h && t.width() == logits.w && t.num_classes() == logits.c,
                "inpaint_loss: shape mismatch");
        for (int y = 0; y < logits.h; ++y) {
            for (int x = 0; x < logits.w; ++x) {
                const Label l = t(y, x);
                require(l >= 0 && l < logits.c, "inpaint_loss: target must be hole-free");
                total += pixel_ce(logits, n, y, x, l, grad, 1.0 / count);
            }
        }
    }
    return total / count;
}

double inpaint_loss(const FeatureMap& logits, const SemanticMask& target, FeatureMap* grad) {
    return inpaint_loss(logits, std::vector<const SemanticMask*>{&target}, grad);
}

Inpainter train_inpainter(const std::vector<TrainingPair>& pairs, const InpaintConfig& cfg, TrainLog* log,
                          const Inpainter* init) {
    cfg.validate();
    require(!pairs.empty(), "train_inpainter: empty training corpus");
    const int m = pairs.front().target.num_classes();
    for (const auto& p : pairs) {
        require(p.target.num_classes() == m && p.corrupted.num_classes() == m, "training pairs must share M_s");
        require(p.corrupted.height() == p.target.height() && p.corrupted.width() == p.target.width(),
                "pair shapes differ");
    }
    Inpainter model = init ? *init : Inpainter(m, cfg.widths, cfg.seed);
    require(model.num_classes() == m, "initial model class count mismatch");
    nn::Adam adam(model.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(cfg.seed * 0x2545F4914F6CDD1DULL + 7);
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    double window = 0.0;
    int in_window = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<const SemanticMask*> inputs;
        std::vector<const SemanticMask*> targets;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const TrainingPair& p = pairs[pick(rng)];
            inputs.push_back(&p.corrupted);
            targets.push_back(&p.target);
        }
        Inpainter::Cache cache;
        const FeatureMap logits = model.forward(model.encode(inputs), &cache);
        FeatureMap grad;
        const double loss = inpaint_loss(logits, targets, &grad);
        model.params().zero_grad();
        model.backward(cache, grad);
        adam.step(model.params());
        window += loss;
        if (++in_window == cfg.log_every) {
            if (log) log->checkpoint_losses.push_back(window / in_window);
            window = 0.0;
            in_window = 0;
        }
    }
    return model;
}

double hole_accuracy(const Inpainter& model, const std::vector<TrainingPair>& pairs) {
    std::size_t holes = 0;
    std::size_t right = 0;
    for (const auto& p : pairs) {
        const SemanticMask filled = inpaint(model, p.corrupted);
        for (std::size_t i = 0; i < p.corrupted.pixels(); ++i) {
            if (p.corrupted[i] != p.corrupted.hole()) continue;
            ++holes;
            right += filled[i] == p.target[i];
        }
    }
    require(holes > 0, "hole_accuracy: no hole pixels in the evaluation set");
    return static_cast<double>(right) / static_cast<double>(holes);
}

}  // namespace semscene::inpaint
