// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "semscene/appearance/appearance.hpp"
#include "semscene/common/error.hpp"
#include "support.hpp"

namespace semscene::appearance {
namespace {

constexpr int kM = 3;

Box unit_box() { return {Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1)}; }

AppearanceConfig small_config(int r = 8, int c = 2) {
    AppearanceConfig cfg;
    cfg.plane_resolution = r;
    cfg.plane_channels = c;
    cfg.hidden = 8;
    cfg.sky_resolution = 6;
    cfg.bounds = unit_box();
    cfg.seed = 3;
    return cfg;
}

// Independent bilinear lookup of plane k at world point p.
double oracle_plane(const AppearanceField& f, int k, int ch, const Eigen::Vector3d& p) {
    static const int axes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    const auto& cfg = f.config();
    const int r = cfg.plane_resolution;
    const auto& g = f.params()[f.params().find(k == 0 ? "triplane.xy" : k == 1 ? "triplane.xz" : "triplane.yz")].value;
    double uv[2];
    for (int a = 0; a < 2; ++a) {
        const int ax = axes[k][a];
        uv[a] = std::clamp((p[ax] - cfg.bounds.lo[ax]) / cfg.bounds.extent()[ax], 0.0, 1.0) * (r - 1);
    }
    double sum = 0.0;
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i) {
            const double wu = std::max(0.0, 1.0 - std::abs(uv[0] - i));
            const double wv = std::max(0.0, 1.0 - std::abs(uv[1] - j));
            sum += wu * wv * g[(static_cast<std::size_t>(j) * r + i) * cfg.plane_channels + ch];
        }
    return sum;
}

TEST(Triplane, ConstantPlanesGiveConstantFeatures) {
    AppearanceField f(small_config());
    for (const char* n : {"triplane.xy", "triplane.xz", "triplane.yz"}) {
        auto& t = f.params()[f.params().find(n)];
        std::fill(t.value.begin(), t.value.end(), 0.7);
    }
    std::mt19937_64 rng(1);
    const Points x = Points::Random(3, 50) * 1.5;
    const Mat feat = f.triplane_sample(x);
    EXPECT_LE((feat.array() - 0.7).abs().maxCoeff(), 1e-12);
}

TEST(Triplane, GridNodeReturnsStoredFeature) {
    AppearanceField f(small_config(5, 3));
    // Node (i, j) of the xy plane sits at x = -1 + 2i/4, y = -1 + 2j/4.
    const Eigen::Vector3d p(-1.0 + 2.0 * 3 / 4, -1.0 + 2.0 * 1 / 4, -1.0 + 2.0 * 2 / 4);
    const Mat feat = f.triplane_sample(p);
    const auto& xy = f.params()[f.params().find("triplane.xy")].value;
    const auto& xz = f.params()[f.params().find("triplane.xz")].value;
    for (int ch = 0; ch < 3; ++ch) {
        EXPECT_EQ(feat(ch, 0), xy[(1 * 5 + 3) * 3 + ch]);
        EXPECT_EQ(feat(3 + ch, 0), xz[(2 * 5 + 3) * 3 + ch]);
    }
}

TEST(Triplane, MatchesScalarBilinearOracle) {
    AppearanceField f(small_config(7, 4));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    Points x(3, 200);
    for (int i = 0; i < 200; ++i) x.col(i) = Eigen::Vector3d(u(rng), u(rng), u(rng));
    const Mat feat = f.triplane_sample(x);
    for (int i = 0; i < 200; ++i)
        for (int k = 0; k < 3; ++k)
            for (int ch = 0; ch < 4; ++ch) EXPECT_NEAR(feat(k * 4 + ch, i), oracle_plane(f, k, ch, x.col(i)), 1e-6);
}

TEST(Triplane, LipschitzBoundedByGridDifferences) {
    AppearanceField f(small_config(6, 2));
    double max_diff = 0.0;
    for (const char* n : {"triplane.xy", "triplane.xz", "triplane.yz"}) {
        const auto& g = f.params()[f.params().find(n)].value;
        for (int j = 0; j < 6; ++j)
            for (int i = 0; i < 6; ++i)
                for (int c = 0; c < 2; ++c) {
                    const double v = g[(j * 6 + i) * 2 + c];
                    if (i + 1 < 6) max_diff = std::max(max_diff, std::abs(g[(j * 6 + i + 1) * 2 + c] - v));
                    if (j + 1 < 6) max_diff = std::max(max_diff, std::abs(g[((j + 1) * 6 + i) * 2 + c] - v));
                }
    }
    // Cell width is 2/5, so per-axis slope is at most max_diff * 5/2 and a
    // feature depends on two axes.
    const double lip = 2.0 * max_diff * 2.5;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Vector3d a = Eigen::Vector3d::Random() * 0.9;
        const Eigen::Vector3d d = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized() * 1e-3;
        const Mat fa = f.triplane_sample(a);
        const Mat fb = f.triplane_sample(Eigen::Vector3d(a + d));
        EXPECT_LE((fa - fb).cwiseAbs().maxCoeff(), lip * d.norm() + 1e-12);
    }
}

TEST(Field, ColorGradientsMatchFiniteDifferences) {
    AppearanceField f(small_config(4, 2));
    const Points x = Points::Random(3, 3) * 0.8;
    const Mat w = Mat::Random(3, 3);
    AppearanceField::ColorCache cache;
    f.params().zero_grad();
    f.colors(x, &cache);
    f.colors_backward(cache, w);
    const std::vector<double> grad = f.params().flat_grads();
    std::vector<double> flat = f.params().flat_values();
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> pick(0, flat.size() - 1);
    const double h = 1e-6;
    int checked = 0;
    for (int trial = 0; trial < 400 && checked < 40; ++trial) {
        const std::size_t i = pick(rng);
        if (grad[i] == 0.0) continue;
        const double keep = flat[i];
        flat[i] = keep + h;
        f.params().set_flat_values(flat);
        const double up = (f.colors(x).array() * w.array()).sum();
        flat[i] = keep - h;
        f.params().set_flat_values(flat);
        const double down = (f.colors(x).array() * w.array()).sum();
        flat[i] = keep;
        f.params().set_flat_values(flat);
        const double fd = (up - down) / (2 * h);
        EXPECT_LE(std::abs(fd - grad[i]) / std::max(1e-8, std::abs(fd) + std::abs(grad[i])), 1e-4) << i;
        ++checked;
    }
    EXPECT_GE(checked, 20);
}

TEST(Sky, ReflectionFoldsIntoRange) {
    EXPECT_DOUBLE_EQ(reflect_coord(2.5, 5), 2.5);
    EXPECT_DOUBLE_EQ(reflect_coord(-1.0, 5), 1.0);
    EXPECT_DOUBLE_EQ(reflect_coord(5.0, 5), 3.0);
    EXPECT_DOUBLE_EQ(reflect_coord(9.0, 5), 1.0);
    EXPECT_DOUBLE_EQ(reflect_coord(-7.5, 5), 0.5);
}

// ---- surface hits ----

warp::LabeledMesh one_triangle() {
    warp::LabeledMesh m;
    m.vertices = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)};
    m.triangles = {{0, 1, 2}};
    m.vertex_labels = {0, 0, 0};
    m.num_classes = kM;
    return m;
}

TEST(SurfaceHits, RayThroughCentroidHitsCentroid) {
    const kernels::Bvh bvh = build_bvh(one_triangle());
    const Eigen::Vector3d c(1.0 / 3, 1.0 / 3, 0);
    const std::vector<Ray> rays{{Eigen::Vector3d(0.2, 0.1, 2), (c - Eigen::Vector3d(0.2, 0.1, 2)).normalized()},
                                {Eigen::Vector3d(-1, 0.2, 0.5), Eigen::Vector3d(1, 0, 0)}};
    const SurfaceHits h = surface_intersect(bvh, rays);
    ASSERT_TRUE(h.hit[0]);
    EXPECT_LE((h.points.col(0) - c).norm(), 1e-6);
    EXPECT_TRUE(h.is_sky(1));
}

TEST(SurfaceHits, MatchBruteForceOnRandomRays) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    warp::LabeledMesh m;
    m.num_classes = kM;
    for (int t = 0; t < 60; ++t) {
        const Eigen::Vector3d c(u(rng), u(rng), u(rng));
        for (int k = 0; k < 3; ++k) {
            m.vertices.push_back(c + 0.3 * Eigen::Vector3d(u(rng), u(rng), u(rng)));
            m.vertex_labels.push_back(0);
        }
        m.triangles.push_back({3 * t, 3 * t + 1, 3 * t + 2});
    }
    const kernels::Bvh bvh = build_bvh(m);
    std::vector<Ray> rays;
    for (int i = 0; i < 1000; ++i)
        rays.push_back({Eigen::Vector3d(u(rng), u(rng), u(rng)) * 2.0,
                        Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized()});
    const SurfaceHits h = surface_intersect(bvh, rays);
    int hits = 0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
        const kernels::RayHit b = kernels::intersect_bruteforce(rays[i], m.vertices, m.triangles);
        ASSERT_EQ(h.hit[i] != 0, b.hit);
        if (!b.hit) continue;
        ++hits;
        EXPECT_EQ(h.depth[i], b.t);
    }
    EXPECT_GT(hits, 30);
}

// ---- rendering ----

struct TerrainFixture : ::testing::Test {
    OracleScene scene = make_oracle_scene(4, kM, default_scene_bounds());
    warp::LabeledMesh mesh;
    kernels::Bvh bvh{{}, {}};
    AppearanceField field{[] {
        AppearanceConfig c;
        c.bounds = default_scene_bounds();
        c.plane_resolution = 16;
        c.plane_channels = 4;
        c.hidden = 16;
        c.sky_resolution = 8;
        return c;
    }()};

    void SetUp() override {
        const Camera cam = testing::scene_camera(48, 48);
        const auto [mask, depth] = render_oracle(scene, cam);
        mesh = warp::depth_to_mesh_partial(mask, depth, cam);
        bvh = build_bvh(mesh);
        auto& sky = field.params()[field.params().find("sky")].value;
        for (std::size_t i = 0; i < sky.size(); ++i) sky[i] = 0.1 + 0.8 * static_cast<double>(i % 7) / 6.0;
    }
};

TEST_F(TerrainFixture, SameCameraTwiceIsIdentical) {
    const Camera cam = testing::scene_camera(24, 24);
    EXPECT_EQ(render_appearance(field, bvh, cam), render_appearance(field, bvh, cam));
}

TEST_F(TerrainFixture, SurfacePointHasTheSameColorFromTwoViews) {
    const Camera probe = testing::scene_camera(48, 48);
    const SurfaceHits h = surface_intersect(bvh, probe);
    int compared = 0;
    for (int pixel : {24 * 48 + 24, 30 * 48 + 10, 36 * 48 + 40}) {
        if (!h.hit[static_cast<std::size_t>(pixel)]) continue;
        const Eigen::Vector3d x = h.points.col(pixel);
        // Odd-sized cameras aimed at x put it exactly on the center pixel.
        const Camera a = Camera::look_at(testing::kEye, x, Eigen::Vector3d::UnitZ(), Intrinsics::from_fov(33, 33, 40), 33, 33);
        const Camera b = Camera::look_at(testing::kEye + Eigen::Vector3d(0.15, 0.05, 0.1), x, Eigen::Vector3d::UnitZ(),
                                         Intrinsics::from_fov(33, 33, 40), 33, 33);
        const ColorImage ia = render_appearance(field, bvh, a);
        const ColorImage ib = render_appearance(field, bvh, b);
        const SurfaceHits ha = surface_intersect(bvh, a);
        const SurfaceHits hb = surface_intersect(bvh, b);
        const std::size_t c = 16 * 33 + 16;
        if (!ha.hit[c] || !hb.hit[c] || (ha.points.col(c) - hb.points.col(c)).norm() > 1e-9) continue;
        for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(ia(16, 16, ch), ib(16, 16, ch), 1e-6);
        ++compared;
    }
    EXPECT_GE(compared, 2);
}

TEST_F(TerrainFixture, AllSkyCameraResamplesSkyPlane) {
    const Box b = field.config().bounds;
    const Eigen::Vector3d eye(0.0, 0.0, 3.0);
    const Camera up = Camera::look_at(eye, eye + Eigen::Vector3d(0, 1, 0.6), Eigen::Vector3d::UnitZ(),
                                      Intrinsics::from_fov(16, 16, 50), 16, 16);
    const ColorImage img = render_appearance(field, bvh, up);
    const auto& sky = field.params()[field.params().find("sky")].value;
    const int n = field.config().sky_resolution;
    const double e = b.extent().maxCoeff();
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const Ray r = up.pixel_ray(x, y);
            const Eigen::Vector3d p = r.origin + (b.hi.y() - r.origin.y()) / r.dir.y() * r.dir;
            double uv[2] = {(p.x() - b.center().x() + e) / (2 * e) * (n - 1), (p.z() - b.lo.z()) / (2 * e) * (n - 1)};
            for (double& s : uv) {
                // Mirror padding written out as repeated folding.
                while (s < 0 || s > n - 1) s = s < 0 ? -s : 2.0 * (n - 1) - s;
            }
            for (int ch = 0; ch < 3; ++ch) {
                double v = 0.0;
                for (int j = 0; j < n; ++j)
                    for (int i = 0; i < n; ++i)
                        v += std::max(0.0, 1 - std::abs(uv[0] - i)) * std::max(0.0, 1 - std::abs(uv[1] - j)) *
                             sky[(static_cast<std::size_t>(j) * n + i) * 3 + ch];
                EXPECT_NEAR(img(y, x, ch), v, 1e-6);
            }
        }
}

// ---- losses ----

FeatureMap random_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FeatureMap f(1, 3, h, w);
    for (double& v : f.data) v = u(rng);
    return f;
}

template <typename Loss>
void check_image_gradient(const FeatureMap& a, const Loss& loss, const FeatureMap& analytic) {
    const double h = 1e-3;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        FeatureMap p = a;
        FeatureMap m = a;
        p.data[i] += h;
        m.data[i] -= h;
        const double fd = (loss(p) - loss(m)) / (2 * h);
        const double g = analytic.data[i];
        EXPECT_LE(std::abs(fd - g), 1e-4 * std::max({std::abs(fd), std::abs(g), 1e-6})) << i;
    }
}

TEST(Perceptual, ZeroForIdenticalAndSymmetric) {
    const FeatureMap a = random_image(9, 11, 1);
    const FeatureMap b = random_image(9, 11, 2);
    EXPECT_EQ(perceptual_loss(a, a, nullptr), 0.0);
    EXPECT_EQ(perceptual_loss(a, b, nullptr), perceptual_loss(b, a, nullptr));
    EXPECT_GT(perceptual_loss(a, b, nullptr), 0.0);
}

// Straightforward per-image pyramid, features compared afterwards.
double scalar_perceptual(const FeatureMap& a, const FeatureMap& b) {
    auto pyramid = [](const FeatureMap& img) {
        std::vector<std::vector<std::vector<double>>> levels;  // level, channel, pixel
        std::vector<int> hs{img.h};
        std::vector<int> ws{img.w};
        std::vector<std::vector<double>> cur(3);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) cur[c].push_back(img.at(0, c, y, x));
        levels.push_back(cur);
        for (int l = 1; l < 3; ++l) {
            const int h = hs.back();
            const int w = ws.back();
            const int h2 = (h + 1) / 2;
            const int w2 = (w + 1) / 2;
            const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
            std::vector<std::vector<double>> next(3, std::vector<double>(static_cast<std::size_t>(h2) * w2));
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < h2; ++y)
                    for (int x = 0; x < w2; ++x) {
                        double s = 0.0;
                        for (int i = 0; i < 5; ++i)
                            for (int j = 0; j < 5; ++j) {
                                const int yy = std::clamp(2 * y + i - 2, 0, h - 1);
                                const int xx = std::clamp(2 * x + j - 2, 0, w - 1);
                                s += k[i] * k[j] * levels.back()[c][static_cast<std::size_t>(yy) * w + xx];
                            }
                        next[c][static_cast<std::size_t>(y) * w2 + x] = s;
                    }
            levels.push_back(next);
            hs.push_back(h2);
            ws.push_back(w2);
        }
        // Append Sobel responses.
        std::vector<std::vector<std::vector<double>>> feats;
        for (int l = 0; l < 3; ++l) {
            const int h = hs[l];
            const int w = ws[l];
            std::vector<std::vector<double>> f;
            for (int c = 0; c < 3; ++c) {
                const auto& p = levels[l][c];
                auto at = [&](int y, int x) {
                    return p[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
                };
                std::vector<double> gx;
                std::vector<double> gy;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        gx.push_back((at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1) - at(y - 1, x - 1) -
                                      2 * at(y, x - 1) - at(y + 1, x - 1)) / 8.0);
                        gy.push_back((at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1) - at(y - 1, x - 1) -
                                      2 * at(y - 1, x) - at(y - 1, x + 1)) / 8.0);
                    }
                f.push_back(p);
                f.push_back(gx);
                f.push_back(gy);
            }
            feats.push_back(f);
        }
        return feats;
    };
    const auto fa = pyramid(a);
    const auto fb = pyramid(b);
    double loss = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < fa[l].size(); ++k)
            for (std::size_t i = 0; i < fa[l][k].size(); ++i, ++n) s += std::pow(fa[l][k][i] - fb[l][k][i], 2);
        loss += s / static_cast<double>(n);
    }
    return loss;
}

TEST(Perceptual, MatchesScalarOracle) {
    for (auto [h, w] : {std::pair{13, 10}, {8, 8}, {5, 7}}) {
        const FeatureMap a = random_image(h, w, 3);
        const FeatureMap b = random_image(h, w, 4);
        EXPECT_NEAR(perceptual_loss(a, b, nullptr), scalar_perceptual(a, b), 1e-6);
    }
}

TEST(Perceptual, FeatureMapsHaveNineChannelsPerLevel) {
    const auto f = perceptual_features(random_image(9, 6, 5), 3);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[0].c, 9);
    EXPECT_EQ(f[1].h, 5);
    EXPECT_EQ(f[2].w, 2);
}

TEST(Perceptual, GradientMatchesFiniteDifferences) {
    const FeatureMap a = random_image(2, 2, 6);
    const FeatureMap b = random_image(2, 2, 7);
    FeatureMap g;
    perceptual_loss(a, b, &g);
    check_image_gradient(a, [&](const FeatureMap& x) { return perceptual_loss(x, b, nullptr); }, g);
    const FeatureMap c = random_image(4, 3, 8);  // 36 entries, still small
    const FeatureMap d = random_image(4, 3, 9);
    perceptual_loss(c, d, &g);
    check_image_gradient(c, [&](const FeatureMap& x) { return perceptual_loss(x, d, nullptr); }, g);
}

TEST(L2, ValueAndGradient) {
    const FeatureMap a = random_image(2, 2, 10);
    FeatureMap b = a;
    for (double& v : b.data) v += 0.5;
    EXPECT_NEAR(l2_loss(a, b, nullptr), 0.25, 1e-12);
    const FeatureMap c = random_image(2, 2, 11);
    FeatureMap g;
    l2_loss(a, c, &g);
    check_image_gradient(a, [&](const FeatureMap& x) { return l2_loss(x, c, nullptr); }, g);
}

SemanticMask small_mask(int h, int w) {
    SemanticMask m(h, w, kM);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m(y, x) = (x + 2 * y) % kM;
    return m;
}

TEST(Adversarial, UniformDiscriminatorGivesLogClassCount) {
    Discriminator d(kM, 4, 1);
    auto& last = d.params()[d.params().find("disc2.weight")];
    std::fill(last.value.begin(), last.value.end(), 0.0);
    auto& bias = d.params()[d.params().find("disc2.bias")];
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
    const AdversarialLosses l = adversarial_step(d, random_image(3, 3, 1), random_image(3, 3, 2), small_mask(3, 3), nullptr);
    EXPECT_NEAR(l.gen, std::log(kM + 1.0), 1e-12);
    EXPECT_NEAR(l.disc, 2.0 * std::log(kM + 1.0), 1e-12);
}

TEST(Adversarial, ConfidentFakeVerdictStaysFinite) {
    Discriminator d(kM, 4, 1);
    auto& last = d.params()[d.params().find("disc2.weight")];
    std::fill(last.value.begin(), last.value.end(), 0.0);
    auto& bias = d.params()[d.params().find("disc2.bias")];
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
    bias.value[kM] = 1e4;
    FeatureMap g;
    const AdversarialLosses l = adversarial_step(d, random_image(3, 3, 1), random_image(3, 3, 2), small_mask(3, 3), &g);
    EXPECT_TRUE(std::isfinite(l.gen));
    EXPECT_NEAR(l.gen, -std::log(kProbabilityFloor), 1e-9);
    EXPECT_GT(l.gen, 20.0);
}

TEST(Adversarial, GeneratorGradientMatchesFiniteDifferences) {
    Discriminator d(kM, 3, 2);
    const FeatureMap gt = random_image(2, 2, 3);
    const SemanticMask m = small_mask(2, 2);
    const FeatureMap r = random_image(2, 2, 4);
    FeatureMap g;
    adversarial_step(d, r, gt, m, &g);
    check_image_gradient(r, [&](const FeatureMap& x) { return adversarial_step(d, x, gt, m, nullptr).gen; }, g);
}

TEST(Adversarial, DiscriminatorGradientMatchesFiniteDifferences) {
    Discriminator d(kM, 2, 5);
    const FeatureMap gt = random_image(2, 2, 6);
    const FeatureMap r = random_image(2, 2, 7);
    const SemanticMask m = small_mask(2, 2);
    d.params().zero_grad();
    adversarial_step(d, r, gt, m, nullptr);
    const std::vector<double> grad = d.params().flat_grads();
    std::vector<double> flat = d.params().flat_values();
    const double h = 1e-5;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double keep = flat[i];
        flat[i] = keep + h;
        d.params().set_flat_values(flat);
        const double up = adversarial_step(d, r, gt, m, nullptr).disc;
        flat[i] = keep - h;
        d.params().set_flat_values(flat);
        const double down = adversarial_step(d, r, gt, m, nullptr).disc;
        flat[i] = keep;
        d.params().set_flat_values(flat);
        const double fd = (up - down) / (2 * h);
        EXPECT_LE(std::abs(fd - grad[i]), 1e-4 * std::max({std::abs(fd), std::abs(grad[i]), 1e-6})) << i;
    }
}

TEST(Adversarial, RejectsMaskWithHoles) {
    Discriminator d(kM, 2, 5);
    SemanticMask m = small_mask(2, 2);
    m(0, 0) = m.hole();
    EXPECT_THROW(adversarial_step(d, random_image(2, 2, 1), random_image(2, 2, 2), m, nullptr), Error);
}

// ---- training ----

// Paints every class a flat color; stands in for any external synthesizer.
class MockSynthesizer final : public adapters::SynthesizerAdapter {
public:
    ColorImage synthesize(const SemanticMask& mask, std::uint64_t) const override {
        ColorImage img(mask.height(), mask.width());
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                for (int c = 0; c < 3; ++c) img(y, x, c) = 0.2f + 0.2f * static_cast<float>((mask(y, x) + c) % 4);
        ++calls;
        return img;
    }
    std::string name() const override { return "mock"; }
    mutable int calls = 0;
};

struct TrainFixture : TerrainFixture {
    std::vector<Camera> cams;
    std::vector<SemanticMask> masks;
    void SetUp() override {
        TerrainFixture::SetUp();
        for (int i = 0; i < 2; ++i) {
            cams.push_back(testing::scene_camera(24, 24, testing::kEye + Eigen::Vector3d(0.1 * i, 0, 0)));
            masks.push_back(render_oracle(scene, cams.back()).first);
        }
    }
    TrainConfig config(int iters) const {
        TrainConfig cfg;
        cfg.field = field.config();
        cfg.iterations = iters;
        cfg.log_every = 10;
        return cfg;
    }
};

TEST_F(TrainFixture, MockSynthesizerDrivesTrainingThroughTheInterface) {
    MockSynthesizer mock;
    const auto views = make_appearance_views(mock, cams, masks, 9);
    EXPECT_EQ(mock.calls, 2);
    TrainLog log;
    const AppearanceField f = train_appearance(bvh, views, config(60), &log);
    ASSERT_EQ(log.losses.size(), 6u);
    EXPECT_LT(log.losses.back(), log.losses.front());
}

TEST_F(TrainFixture, ZeroLearningRateKeepsParameters) {
    MockSynthesizer mock;
    const auto views = make_appearance_views(mock, cams, masks, 9);
    TrainConfig cfg = config(5);
    cfg.learning_rate = 0.0;
    const AppearanceField f = train_appearance(bvh, views, cfg);
    EXPECT_TRUE(f.params().same_values(AppearanceField(cfg.field).params()));
}

TEST_F(TrainFixture, SingleViewWithoutAdversaryDecreasesMonotonically) {
    adapters::StubSynthesizer synth;
    auto views = make_appearance_views(synth, cams, masks, 9);
    views.resize(1);
    TrainConfig cfg = config(200);
    cfg.w_adv = 0.0;
    cfg.learning_rate = 2e-3;
    cfg.log_every = 20;
    TrainLog log;
    train_appearance(bvh, views, cfg, &log);
    for (std::size_t i = 1; i < log.losses.size(); ++i) EXPECT_LE(log.losses[i], log.losses[i - 1]) << i;
}

TEST_F(TrainFixture, CheckpointRoundTrip) {
    const auto path = testing::temp_path("appearance.ckpt");
    field.save(path);
    const AppearanceField back = AppearanceField::load(path);
    const Camera cam = testing::scene_camera(16, 16);
    const ColorImage a = render_appearance(field, bvh, cam);
    const ColorImage b = render_appearance(back, bvh, cam);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-5);
}

// ---- metrics ----

TEST(Metrics, PsnrOfKnownError) {
    ColorImage a(4, 4, 0.5f);
    ColorImage b(4, 4, 0.6f);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-4);
    EXPECT_EQ(psnr(a, a), 100.0);
}

TEST(Metrics, ReprojectionOfIdenticalViewsIsZeroAndDisjointViewsAreUndefined) {
    const Camera cam = testing::down_camera(8, 8, 0.0, 1.0);
    DepthMap d(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) d.set(y, x, 1.0f);
    ColorImage img(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img(y, x, 0) = static_cast<float>(x) / 8.0f;
    EXPECT_EQ(reprojected_color_difference({img, img}, {d, d}, {cam, cam}), 0.0);
    const Camera away = Camera::look_at(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, 2), Eigen::Vector3d::UnitY(),
                                        Intrinsics::from_fov(8, 8, 50.0), 8, 8);
    try {
        reprojected_color_difference({img, img}, {d, d}, {cam, away});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kUndefinedMetric);
    }
}

}  // namespace
}  // namespace semscene::appearance
