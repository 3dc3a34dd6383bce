// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "semscene/scenekit/io.hpp"
#include "semscene/scenekit/oracle_scene.hpp"
#include "support.hpp"

namespace semscene {
namespace {

using testing::scene_camera;
using testing::temp_path;

// Independent ray-march: fixed fine step from the box entry, then bisection.
bool march_oracle(const OracleScene& scene, const Ray& ray, double& t_hit) {
    double t0 = 0.0;
    double t1 = 0.0;
    if (!scene.bounds().intersect(ray, t0, t1)) return false;
    auto gap = [&](double t) {
        const Eigen::Vector3d p = ray.origin + t * ray.dir;
        return p.z() - scene.height(p.x(), p.y());
    };
    const double step = 2e-4;
    double prev = t0;
    if (gap(prev) <= 0.0) {
        t_hit = prev;
        return true;
    }
    for (double t = t0 + step;; t += step) {
        const double tc = std::min(t, t1);
        if (gap(tc) <= 0.0) {
            double a = prev;
            double b = tc;
            for (int i = 0; i < 100; ++i) {
                const double m = 0.5 * (a + b);
                (gap(m) > 0.0 ? a : b) = m;
            }
            t_hit = 0.5 * (a + b);
            return true;
        }
        if (tc >= t1) return false;
        prev = tc;
    }
}

TEST(OracleScene, DeterministicForEqualSeed) {
    const auto a = make_oracle_scene(0, 4, default_scene_bounds());
    const auto b = make_oracle_scene(0, 4, default_scene_bounds());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 500; ++i) {
        const double x = u(rng);
        const double y = u(rng);
        EXPECT_EQ(a.label_at(x, y), b.label_at(x, y));
        EXPECT_EQ(a.height(x, y), b.height(x, y));
    }
}

TEST(OracleScene, SeedChangesHeightfield) {
    const auto a = make_oracle_scene(0, 4, default_scene_bounds());
    const auto b = make_oracle_scene(1, 4, default_scene_bounds());
    double diff = 0.0;
    for (int i = 0; i < 50; ++i) diff += std::abs(a.height(0.05 * i - 1.2, 0.3) - b.height(0.05 * i - 1.2, 0.3));
    EXPECT_GT(diff, 1e-3);
}

TEST(OracleScene, RejectsTooFewClasses) {
    try {
        make_oracle_scene(0, 1, default_scene_bounds());
        FAIL() << "expected an exception";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
}

TEST(OracleScene, LabelsAreForegroundClasses) {
    const auto scene = make_oracle_scene(5, 4, default_scene_bounds());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 1000; ++i) {
        const Label l = scene.label_at(u(rng), u(rng));
        EXPECT_GE(l, 1);
        EXPECT_LT(l, 4);
    }
}

TEST(RenderOracle, FlatPlaneFrontoParallel) {
    const auto scene = make_flat_scene(0.0, 3, default_scene_bounds());
    const Camera cam = testing::down_camera(32, 32, 0.0, 2.0);
    const auto [mask, depth] = render_oracle(scene, cam);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            ASSERT_TRUE(depth.valid(y, x));
            EXPECT_NEAR(depth.value(y, x), 2.0, 1e-6);
            EXPECT_NE(mask(y, x), scene.sky_label());
        }
    }
}

TEST(RenderOracle, MissedRayIsSky) {
    const auto scene = make_oracle_scene(2, 4, default_scene_bounds());
    // Looking straight up from above the terrain.
    const Eigen::Vector3d eye(0.0, 0.0, 1.2);
    const Camera cam = Camera::look_at(eye, eye + Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(),
                                       Intrinsics::from_fov(8, 8, 40.0), 8, 8);
    const auto [mask, depth] = render_oracle(scene, cam);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            EXPECT_EQ(mask(y, x), scene.sky_label());
            EXPECT_FALSE(depth.valid(y, x));
        }
    }
}

TEST(RenderOracle, MatchesFineRayMarch) {
    const auto scene = make_oracle_scene(7, 4, default_scene_bounds());
    const Camera cam = scene_camera(24, 24);
    const auto [mask, depth] = render_oracle(scene, cam);
    int hits = 0;
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 24; ++x) {
            const Ray ray = cam.pixel_ray(x, y);
            double t = 0.0;
            const bool hit = march_oracle(scene, ray, t);
            ASSERT_EQ(hit, depth.valid(y, x)) << x << "," << y;
            if (!hit) continue;
            ++hits;
            EXPECT_NEAR(depth.value(y, x), t * ray.dir.dot(cam.forward()), 1e-4);
        }
    }
    EXPECT_GT(hits, 100);
}

TEST(RenderOracle, SkyExactlyWhereDepthInvalid) {
    const auto scene = make_oracle_scene(11, 5, default_scene_bounds());
    const auto [mask, depth] = render_oracle(scene, scene_camera(40, 40));
    std::size_t sky = 0;
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 40; ++x) {
            EXPECT_EQ(mask(y, x) == scene.sky_label(), !depth.valid(y, x));
            sky += mask(y, x) == scene.sky_label();
        }
    }
    EXPECT_GT(sky, 0u);
    EXPECT_LT(sky, 1600u);
}

TEST(RenderOracle, ParallelMatchesSerialAndIsDeterministic) {
    const auto scene = make_oracle_scene(3, 4, default_scene_bounds());
    const Camera cam = scene_camera(33, 29);
    const auto a = render_oracle(scene, cam);
    const auto b = render_oracle_serial(scene, cam);
    const auto c = render_oracle(scene, cam);
    EXPECT_TRUE(a.first == b.first);
    EXPECT_TRUE(a.second == b.second);
    EXPECT_TRUE(a.first == c.first);
    EXPECT_TRUE(a.second == c.second);
}

TEST(Camera, ProjectUnprojectRoundTrip) {
    const Camera cam = scene_camera(20, 30);
    for (double u : {0.5, 7.25, 29.5}) {
        for (double v : {0.5, 11.0, 19.5}) {
            const Eigen::Vector3d p = cam.project(cam.unproject(u, v, 1.7));
            EXPECT_NEAR(p.x(), u, 1e-9);
            EXPECT_NEAR(p.y(), v, 1e-9);
            EXPECT_NEAR(p.z(), 1.7, 1e-12);
        }
    }
}

TEST(Camera, RejectsBadRotationAndFocal) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    r(0, 0) = -1.0;  // reflection
    EXPECT_THROW(Camera(Intrinsics{1, 1, 0, 0}, r, Eigen::Vector3d::Zero(), 4, 4), Error);
    EXPECT_THROW(Camera(Intrinsics{0, 1, 0, 0}, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), 4, 4), Error);
    EXPECT_NO_THROW(Camera(Intrinsics{1, 1, 0, 0}, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), 4, 4));
}

TEST(Io, MaskRoundTrip) {
    SemanticMask mask(7, 9, 5);
    std::mt19937 rng(4);
    for (std::size_t i = 0; i < mask.pixels(); ++i) mask[i] = static_cast<Label>(rng() % 6);  // includes HOLE
    const auto path = temp_path("mask.pgm");
    save_mask(path, mask);
    EXPECT_TRUE(load_mask(path, 5) == mask);
}

TEST(Io, MaskLabelOutOfRangeOnLoad) {
    SemanticMask mask(3, 3, 8, 7);
    const auto path = temp_path("mask_big.pgm");
    save_mask(path, mask);
    try {
        load_mask(path, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    }
}

TEST(Io, DepthRoundTripAndSize) {
    DepthMap depth(3, 3);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) depth.set(y, x, 1.0f);
    }
    const auto path = temp_path("ones.bin");
    save_depth(path, depth);
    EXPECT_EQ(std::filesystem::file_size(path), 16u + 36u);
    EXPECT_TRUE(load_depth(path) == depth);

    DepthMap partial(4, 5);
    partial.set(1, 2, 3.25f);
    partial.set(3, 4, 0.001f);
    save_depth(path, partial);
    EXPECT_TRUE(load_depth(path) == partial);
}

TEST(Io, DepthBadMagic) {
    const auto path = temp_path("bad.bin");
    {
        std::ofstream out(path, std::ios::binary);
        const char junk[20] = {'N', 'O', 'P', 'E', 1, 0, 0, 0, 1, 0, 0, 0};
        out.write(junk, sizeof junk);
    }
    try {
        load_depth(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    }
}

TEST(Io, ImageRoundTripOnQuantizedValues) {
    ColorImage img(5, 6);
    std::mt19937 rng(9);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(rng() % 256) / 255.0f;
    const auto path = temp_path("img.ppm");
    save_image(path, img);
    EXPECT_TRUE(load_image(path) == img);
}

}  // namespace
}  // namespace semscene
