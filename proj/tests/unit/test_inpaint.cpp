// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "semscene/common/error.hpp"
#include "semscene/inpaint/inpainter.hpp"
#include "support.hpp"

namespace semscene::inpaint {
namespace {

using nn::FeatureMap;

constexpr int kM = 4;
const std::array<int, 3> kTiny = {4, 6, 8};

// Horizontal bands with a square hole punched out.
TrainingPair band_pair(int size, int shift, int hole_x) {
    TrainingPair p{SemanticMask(size, size, kM), SemanticMask(size, size, kM)};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) p.target(y, x) = ((y + shift) / 4) % kM;
    p.corrupted = p.target;
    for (int y = size / 4; y < size / 2; ++y)
        for (int x = hole_x; x < hole_x + size / 4; ++x) p.corrupted(y, x) = kM;
    return p;
}

double scalar_ce(const FeatureMap& z, int n, int y, int x, int target) {
    double sum = 0.0;
    for (int c = 0; c < z.c; ++c) sum += std::exp(z.at(n, c, y, x));
    return std::log(sum) - z.at(n, target, y, x);
}

TEST(InpaintLoss, OneHotLogitsGiveZeroAndUniformGivesLogM) {
    SemanticMask t(4, 4, 3, 1);
    FeatureMap big(1, 3, 4, 4, 0.0);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) big.at(0, 1, y, x) = 200.0;
    EXPECT_NEAR(inpaint_loss(big, t, nullptr), 0.0, 1e-12);
    const FeatureMap flat(1, 3, 4, 4, 0.7);
    EXPECT_NEAR(inpaint_loss(flat, t, nullptr), std::log(3.0), 1e-12);
}

TEST(InpaintLoss, MatchesScalarLoopAndFiniteDifferences) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_int_distribution<int> lab(0, kM - 1);
    SemanticMask a(4, 8, kM);
    SemanticMask b(4, 8, kM);
    for (std::size_t i = 0; i < a.pixels(); ++i) {
        a[i] = lab(rng);
        b[i] = lab(rng);
    }
    FeatureMap z(2, kM, 4, 8);
    for (double& v : z.data) v = g(rng);
    double ref = 0.0;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x) ref += scalar_ce(z, 0, y, x, a(y, x)) + scalar_ce(z, 1, y, x, b(y, x));
    ref /= 64.0;
    FeatureMap grad;
    const std::vector<const SemanticMask*> ts = {&a, &b};
    EXPECT_NEAR(inpaint_loss(z, ts, &grad), ref, 1e-6);
    const double h = 1e-6;
    for (std::size_t i = 0; i < z.data.size(); i += 7) {
        const double keep = z.data[i];
        z.data[i] = keep + h;
        const double up = inpaint_loss(z, ts, nullptr);
        z.data[i] = keep - h;
        const double dn = inpaint_loss(z, ts, nullptr);
        z.data[i] = keep;
        EXPECT_NEAR(grad.data[i], (up - dn) / (2 * h), 1e-8);
    }
}

TEST(InpaintLoss, RejectsHoleTargets) {
    SemanticMask t(4, 4, 3, 3);
    const FeatureMap z(1, 3, 4, 4);
    EXPECT_THROW(inpaint_loss(z, t, nullptr), Error);
}

TEST(Inpainter, OutputIsHoleFreeAndShapePreserving) {
    const Inpainter model(kM, kTiny, 3);
    SemanticMask m(10, 14, kM, kM);  // all hole, sides not multiples of 4
    const SemanticMask out = inpaint(model, m);
    EXPECT_EQ(out.height(), 10);
    EXPECT_EQ(out.width(), 14);
    EXPECT_FALSE(out.has_holes());
}

TEST(Inpainter, UntrainedLossNearLogM) {
    const Inpainter model(kM, kTiny, 3);
    const TrainingPair p = band_pair(16, 0, 4);
    const FeatureMap z = model.forward(model.encode({&p.corrupted}), nullptr);
    EXPECT_NEAR(inpaint_loss(z, p.target, nullptr), std::log(double(kM)), 0.5);
}

TEST(Inpainter, ParameterGradientsMatchFiniteDifferences) {
    Inpainter model(kM, {2, 3, 3}, 5);
    const TrainingPair p = band_pair(8, 1, 2);
    const FeatureMap x = model.encode({&p.corrupted});
    Inpainter::Cache cache;
    FeatureMap dz;
    inpaint_loss(model.forward(x, &cache), p.target, &dz);
    model.params().zero_grad();
    model.backward(cache, dz);
    const double h = 1e-6;
    std::mt19937_64 rng(9);
    double worst = 0.0;
    for (auto& t : model.params().tensors()) {
        std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
        for (int k = 0; k < 3; ++k) {
            const std::size_t i = pick(rng);
            const double keep = t.value[i];
            t.value[i] = keep + h;
            const double up = inpaint_loss(model.forward(x, nullptr), p.target, nullptr);
            t.value[i] = keep - h;
            const double dn = inpaint_loss(model.forward(x, nullptr), p.target, nullptr);
            t.value[i] = keep;
            const double fd = (up - dn) / (2 * h);
            worst = std::max(worst, std::abs(fd - t.grad[i]) / std::max(1e-6, std::abs(fd) + std::abs(t.grad[i])));
        }
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Training, ZeroLearningRateKeepsInitialParameters) {
    const std::vector<TrainingPair> pairs = {band_pair(16, 0, 4)};
    InpaintConfig cfg;
    cfg.resolution = 16;
    cfg.batch_size = 1;
    cfg.iterations = 3;
    cfg.learning_rate = 0.0;
    cfg.widths = kTiny;
    const Inpainter init(kM, kTiny, 11);
    const Inpainter out = train_inpainter(pairs, cfg, nullptr, &init);
    EXPECT_TRUE(out.params().same_values(init.params()));
}

TEST(Training, DeterministicAndLossDecreases) {
    std::vector<TrainingPair> pairs;
    for (int s = 0; s < 4; ++s) pairs.push_back(band_pair(16, s, 2 + 2 * s));
    InpaintConfig cfg;
    cfg.resolution = 16;
    cfg.batch_size = 2;
    cfg.iterations = 120;
    cfg.learning_rate = 5e-3;
    cfg.widths = kTiny;
    cfg.log_every = 20;
    cfg.seed = 2;
    TrainLog a;
    TrainLog b;
    const Inpainter ma = train_inpainter(pairs, cfg, &a);
    const Inpainter mb = train_inpainter(pairs, cfg, &b);
    EXPECT_TRUE(ma.params().same_values(mb.params()));
    ASSERT_EQ(a.checkpoint_losses.size(), 6u);
    EXPECT_LT(a.checkpoint_losses.back(), 0.7 * a.checkpoint_losses.front());
    EXPECT_GT(hole_accuracy(ma, pairs), 0.5);
}

TEST(Training, RejectsBadCorpus) {
    InpaintConfig cfg;
    EXPECT_THROW(train_inpainter({}, cfg), Error);
    std::vector<TrainingPair> mixed = {band_pair(16, 0, 2)};
    mixed.push_back({SemanticMask(16, 16, 5), SemanticMask(16, 16, 5)});
    EXPECT_THROW(train_inpainter(mixed, cfg), Error);
}

TEST(Checkpoint, SaveLoadReproducesPredictions) {
    const Inpainter model(kM, kTiny, 21);
    const auto path = testing::temp_path("inpainter.ckpt");
    model.save(path);
    const Inpainter back = Inpainter::load(path);
    EXPECT_EQ(back.num_classes(), kM);
    const TrainingPair p = band_pair(16, 0, 4);
    const FeatureMap za = model.forward(model.encode({&p.corrupted}), nullptr);
    const FeatureMap zb = back.forward(back.encode({&p.corrupted}), nullptr);
    for (std::size_t i = 0; i < za.data.size(); ++i) EXPECT_NEAR(za.data[i], zb.data[i], 1e-4);
}

}  // namespace
}  // namespace semscene::inpaint
