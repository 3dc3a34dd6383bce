// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "semscene/common/error.hpp"
#include "semscene/semfield/field.hpp"
#include "semscene/semfield/losses.hpp"
#include "semscene/semfield/mesh.hpp"
#include "semscene/semfield/render.hpp"
#include "support.hpp"

namespace semscene::semfield {
namespace {

FieldConfig small_config() {
    FieldConfig cfg;
    cfg.sdf_width = 8;
    cfg.sdf_layers = 2;
    cfg.feature_dim = 3;
    cfg.sem_width = 5;
    cfg.encoding.bands = 2;
    cfg.softplus_beta = 4.0;
    cfg.init_beta = 0.3;
    cfg.bounds = {{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
    return cfg;
}

Points random_points(int n, std::mt19937_64& rng, double lo = -0.9, double hi = 0.9) {
    std::uniform_real_distribution<double> u(lo, hi);
    Points p(3, n);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) p(a, i) = u(rng);
    return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

// Compares accumulated parameter gradients with central differences of `loss`.
template <class F>
double worst_param_error(nn::ParamStore& ps, F loss, double h, int per_tensor, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::vector<double> grads = ps.flat_grads();
    double worst = 0.0;
    std::size_t offset = 0;
    for (auto& t : ps.tensors()) {
        std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
        for (int k = 0; k < per_tensor; ++k) {
            const std::size_t i = pick(rng);
            const double keep = t.value[i];
            t.value[i] = keep + h;
            const double up = loss();
            t.value[i] = keep - h;
            const double dn = loss();
            t.value[i] = keep;
            const double fd = (up - dn) / (2 * h);
            const double an = grads[offset + i];
            if (std::abs(fd) + std::abs(an) > 1e-9) worst = std::max(worst, rel_err(fd, an));
        }
        offset += t.size();
    }
    return worst;
}

TEST(Encoding, OriginAndDimension) {
    PositionalEncoding pe;
    EXPECT_EQ(pe.dim(), 36);
    const Eigen::VectorXd e = pe.encode(Eigen::Vector3d::Zero());
    for (int j = 0; j < 6; ++j)
        for (int a = 0; a < 3; ++a) {
            EXPECT_EQ(e[6 * j + a], 0.0);
            EXPECT_EQ(e[6 * j + 3 + a], 1.0);
        }
    PositionalEncoding with_input{6, true};
    EXPECT_EQ(with_input.dim(), 39);
}

TEST(Encoding, MatchesScalarEvaluation) {
    std::mt19937_64 rng(1);
    PositionalEncoding pe{6, true};
    const Points x = random_points(5, rng, -2.0, 2.0);
    const Mat e = pe.encode_batch(x);
    for (int i = 0; i < 5; ++i) {
        for (int a = 0; a < 3; ++a) EXPECT_EQ(e(a, i), x(a, i));
        for (int j = 0; j < 6; ++j)
            for (int a = 0; a < 3; ++a) {
                const double arg = std::pow(2.0, j) * std::numbers::pi * x(a, i);
                EXPECT_NEAR(e(3 + 6 * j + a, i), std::sin(arg), 1e-12);
                EXPECT_NEAR(e(3 + 6 * j + 3 + a, i), std::cos(arg), 1e-12);
            }
    }
}

TEST(Density, LaplaceCdfValues) {
    EXPECT_DOUBLE_EQ(sdf_to_density(0.0, 3.0, 0.2), 1.5);
    EXPECT_NEAR(sdf_to_density(0.1, 1.0, 0.1), 0.5 * std::exp(-1.0), 1e-12);
    EXPECT_NEAR(sdf_to_density(0.1, 1.0, 0.1), 0.18394, 1e-5);
    EXPECT_NEAR(sdf_to_density(-50.0, 2.0, 0.1), 2.0, 1e-12);
    double prev = sdf_to_density(-1.0, 1.0, 0.1);
    for (double d = -0.99; d < 1.0; d += 0.01) {
        const double s = sdf_to_density(d, 1.0, 0.1);
        EXPECT_LT(s, prev);
        prev = s;
    }
    EXPECT_THROW(sdf_to_density(0.0, 0.0, 0.1), Error);
    EXPECT_THROW(sdf_to_density(0.0, 1.0, -0.1), Error);
}

TEST(Density, PartialsMatchFiniteDifferences) {
    const double h = 1e-6;
    for (double d : {-0.3, -0.01, 0.02, 0.4}) {
        const double beta = 0.15;
        double s = 0.0;
        double sd = 0.0;
        double sb = 0.0;
        density_partials(d, beta, s, sd, sb);
        EXPECT_NEAR(s, sdf_to_density(d, 1.0 / beta, beta), 1e-12);
        const double fd_d = (sdf_to_density(d + h, 1.0 / beta, beta) - sdf_to_density(d - h, 1.0 / beta, beta)) / (2 * h);
        const double fd_b = (sdf_to_density(d, 1.0 / (beta + h), beta + h) -
                             sdf_to_density(d, 1.0 / (beta - h), beta - h)) / (2 * h);
        EXPECT_LT(rel_err(sd, fd_d), 1e-6);
        EXPECT_LT(rel_err(sb, fd_b), 1e-6);
    }
}

TEST(Field, SdfGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    const SemanticField f(small_config(), 3);
    const Points x = random_points(6, rng);
    const Points g = f.sdf_gradient(x);
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i)
        for (int a = 0; a < 3; ++a) {
            Points p = x.col(i);
            p(a, 0) += h;
            const double up = f.sdf(p)[0];
            p(a, 0) -= 2 * h;
            const double dn = f.sdf(p)[0];
            EXPECT_LT(rel_err(g(a, i), (up - dn) / (2 * h)), 1e-5);
        }
}

TEST(Field, EikonalParameterGradients) {
    std::mt19937_64 rng(4);
    SemanticField f(small_config(), 5);
    const Points x = random_points(7, rng);
    f.params().zero_grad();
    f.eikonal(x, 1.0);
    const double worst = worst_param_error(f.params(), [&]() { return f.eikonal(x, 0.0); }, 1e-6, 6, 9);
    EXPECT_LT(worst, 1e-4);
}

TEST(Field, RenderParameterGradients) {
    std::mt19937_64 rng(6);
    SemanticField f(small_config(), 7);
    const SkySemantics sky{4, 0};
    const Camera cam = Camera::look_at({0.0, -2.5, 0.6}, {0.0, 0.0, 0.0}, Eigen::Vector3d::UnitZ(),
                                       Intrinsics::from_fov(4, 4, 60.0), 4, 4);
    const RayBatch rays = RayBatch::from_camera(cam, f.config().bounds);
    // Stratified midpoints only: importance positions move with the
    // parameters and are treated as constants by the backward pass.
    const SampleOptions so{24, 0, false, 0, 64};
    std::normal_distribution<double> g(0.0, 1.0);
    Mat cy(4, rays.size());
    Eigen::VectorXd ct(rays.size());
    Eigen::VectorXd cd(rays.size());
    for (double& v : cy.reshaped()) v = g(rng);
    for (double& v : ct) v = g(rng);
    for (double& v : cd) v = g(rng);
    auto loss = [&]() {
        RenderTape tp;
        render_with_tape(f, rays, sky, so, tp);
        return (tp.out.y.array() * cy.array()).sum() + tp.out.t_fg.dot(ct) + tp.out.depth.dot(cd);
    };
    RenderTape tape;
    render_with_tape(f, rays, sky, so, tape);
    f.params().zero_grad();
    render_backward(f, sky, tape, cy, ct, cd);
    const double worst = worst_param_error(f.params(), loss, 1e-6, 5, 11);
    EXPECT_LT(worst, 1e-4);
}

TEST(Render, QuadratureInvariants) {
    std::mt19937_64 rng(8);
    SemanticField f(small_config(), 9);
    const SkySemantics sky{4, 2};
    const Camera cam = Camera::look_at({0.3, -2.5, 0.9}, {0.0, 0.0, 0.0}, Eigen::Vector3d::UnitZ(),
                                       Intrinsics::from_fov(8, 8, 70.0), 8, 8);
    const RayBatch rays = RayBatch::from_camera(cam, f.config().bounds);
    const RenderOutput out = render_rays(f, rays, sky, {16, 8, true, 3, 16});
    const Eigen::VectorXd ps = sky.probabilities();
    for (Eigen::Index r = 0; r < rays.size(); ++r) {
        EXPECT_NEAR(out.weights.col(r).sum() + out.residual[r], 1.0, 1e-6);
        EXPECT_GE(out.weights.col(r).minCoeff(), 0.0);
        EXPECT_LE(out.weights.col(r).maxCoeff(), 1.0);
        EXPECT_NEAR(out.y.col(r).sum(), 1.0, 1e-6);
        EXPECT_NEAR(out.p_fg.col(r).sum(), 1.0, 1e-6);
        for (int k = 0; k < 4; ++k)
            EXPECT_NEAR(out.y(k, r), out.t_fg[r] * out.p_fg(k, r) + (1.0 - out.t_fg[r]) * ps[k], 1e-9);
    }
}

TEST(Render, ParallelMatchesSerial) {
    SemanticField f(small_config(), 10);
    const SkySemantics sky{4, 0};
    const Camera cam = Camera::look_at({0.0, -2.5, 0.6}, {0.0, 0.0, 0.0}, Eigen::Vector3d::UnitZ(),
                                       Intrinsics::from_fov(12, 12, 60.0), 12, 12);
    const RayBatch rays = RayBatch::from_camera(cam, f.config().bounds);
    const SampleOptions so{16, 8, true, 5, 20};
    const RenderOutput a = render_rays(f, rays, sky, so);
    const RenderOutput b = render_rays_serial(f, rays, sky, so);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.depth, b.depth);
}

TEST(Render, EmptySpaceGivesSky) {
    const int s = 8;
    const int b = 3;
    Mat t(s, b);
    for (int r = 0; r < b; ++r)
        for (int i = 0; i < s; ++i) t(i, r) = 0.1 * (i + 1);
    const Mat delta = Mat::Constant(s, b, 0.1);
    const Mat sigma = Mat::Zero(s, b);
    const Mat logits = Mat::Random(4, s * b);
    const SkySemantics sky{4, 1};
    const RenderOutput out = composite(t, delta, sigma, logits, sky, nullptr);
    for (int r = 0; r < b; ++r) {
        EXPECT_EQ(out.t_fg[r], 0.0);
        EXPECT_TRUE(out.y.col(r).isApprox(sky.probabilities()));
    }
    const RenderOutput opaque = composite(t, delta, Mat::Constant(s, b, 1e6), logits, sky, nullptr);
    for (int r = 0; r < b; ++r) {
        EXPECT_EQ(opaque.t_fg[r], 1.0);
        EXPECT_TRUE(opaque.y.col(r) == opaque.p_fg.col(r));
    }
}

// Analytic half-space SDF z - c rendered by direct composite of dense samples.
TEST(Render, PlaneDepthMatchesIntersection) {
    const double c = -0.2;
    const double beta = 0.002;
    const Eigen::Vector3d o(0.1, -0.3, 1.0);
    const Eigen::Vector3d dir = Eigen::Vector3d(0.2, 0.4, -1.0).normalized();
    const int s = 4000;
    const double near = 0.0;
    const double far = 3.0;
    Mat t(s, 1);
    Mat sigma(s, 1);
    const double step = (far - near) / s;
    for (int i = 0; i < s; ++i) {
        t(i, 0) = near + (i + 0.5) * step;
        sigma(i, 0) = sdf_to_density((o + t(i, 0) * dir).z() - c, 1.0 / beta, beta);
    }
    const Mat delta = Mat::Constant(s, 1, step);
    const RenderOutput out = composite(t, delta, sigma, Mat::Zero(4, s), SkySemantics{4, 0}, nullptr);
    const double expected = (c - o.z()) / dir.z();
    EXPECT_NEAR(out.depth[0], expected, 0.02 * step + beta * 2.0);
}

TEST(Losses, SemanticValues) {
    Mat y = Mat::Zero(4, 2);
    y(1, 0) = 1.0;
    y(3, 1) = 1.0;
    EXPECT_LE(semantic_loss(y, y, 1e-5, nullptr), 1e-5);
    const Mat uni = Mat::Constant(4, 3, 0.25);
    Mat target = Mat::Zero(4, 3);
    target(0, 0) = target(2, 1) = target(3, 2) = 1.0;
    EXPECT_NEAR(semantic_loss(uni, target, 1e-5, nullptr), std::log(4.0), 1e-12);
}

TEST(Losses, AlignmentRecoversAffineMap) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    Eigen::VectorXd d(50);
    for (double& v : d) v = u(rng);
    const Alignment a = align_scale_shift(d, (2.0 * d.array() + 3.0).matrix());
    EXPECT_NEAR(a.w, 2.0, 1e-9);
    EXPECT_NEAR(a.q, 3.0, 1e-9);
    try {
        align_scale_shift(Eigen::VectorXd::Constant(5, 1.3), d.head(5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kDegenerateInput);
    }
}

TEST(Losses, AlignmentBeatsGridSearch) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd d(30);
    Eigen::VectorXd dh(30);
    for (int i = 0; i < 30; ++i) {
        d[i] = 1.0 + std::abs(g(rng));
        dh[i] = 0.7 * d[i] + 0.2 + 0.1 * g(rng);
    }
    const Alignment a = align_scale_shift(d, dh);
    auto residual = [&](double w, double q) { return (w * d.array() + q - dh.array()).square().sum(); };
    const double best = residual(a.w, a.q);
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j)
            EXPECT_LE(best, residual(a.w - 0.5 + i * 0.01, a.q - 0.5 + j * 0.01) + 1e-12);
}

TEST(Losses, DepthLossInvariantAndMatchesTwoStep) {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd d(20);
    Eigen::VectorXd dh(20);
    Mask mask(20, 1);
    for (int i = 0; i < 20; ++i) {
        d[i] = 2.0 + g(rng);
        dh[i] = 1.0 + 0.5 * g(rng);
        if (i % 5 == 0) mask[static_cast<std::size_t>(i)] = 0;
    }
    EXPECT_NEAR(depth_loss(d, (3.0 * d.array() - 1.0).matrix(), {}, nullptr), 0.0, 1e-12);
    EXPECT_NEAR(depth_loss(d, dh, mask, nullptr), depth_loss((2.5 * d.array() + 4.0).matrix(), dh, mask, nullptr), 1e-9);
    // Two-step oracle via Eigen's least-squares solver.
    std::vector<int> idx;
    for (int i = 0; i < 20; ++i)
        if (mask[static_cast<std::size_t>(i)]) idx.push_back(i);
    Eigen::MatrixXd a(idx.size(), 2);
    Eigen::VectorXd b(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        a(k, 0) = d[idx[k]];
        a(k, 1) = 1.0;
        b[k] = dh[idx[k]];
    }
    const Eigen::Vector2d wq = a.colPivHouseholderQr().solve(b);
    const double oracle = (a * wq - b).squaredNorm() / idx.size();
    EXPECT_NEAR(depth_loss(d, dh, mask, nullptr), oracle, 1e-8);
}

TEST(Losses, TransmittanceValues) {
    EXPECT_NEAR(transmittance_loss(Eigen::VectorXd::Constant(1, 0.5), 1e-5, nullptr), 2.0 * std::log(0.5), 1e-12);
    EXPECT_NEAR(transmittance_loss(Eigen::VectorXd::Constant(1, 0.0), 1e-5, nullptr),
                std::log(1e-5) + std::log(1.0 - 1e-5), 1e-12);
    EXPECT_NEAR(transmittance_loss(Eigen::VectorXd::Constant(1, 0.0), 1e-5, nullptr), -11.5129, 1e-4);
    EXPECT_GT(transmittance_loss(Eigen::VectorXd::Constant(1, 0.5), 1e-5, nullptr),
              transmittance_loss(Eigen::VectorXd::Constant(1, 0.01), 1e-5, nullptr));
}

TEST(Losses, EikonalOnGradients) {
    Eigen::Matrix3Xd g(3, 2);
    g.col(0) = Eigen::Vector3d(0.6, 0.0, 0.8);
    g.col(1) = Eigen::Vector3d(0.0, 1.0, 0.0);
    EXPECT_LE(eikonal_loss(g, nullptr), 1e-10);
    EXPECT_NEAR(eikonal_loss(2.0 * g, nullptr), 1.0, 1e-12);
}

// A field whose hidden units stay in the linear regime of softplus
// represents f(x) = s (n . x) exactly up to exp(-beta * bias).
SemanticField linear_probe(double scale) {
    FieldConfig cfg = small_config();
    cfg.encoding = {0, true};
    cfg.sdf_layers = 1;
    cfg.softplus_beta = 10.0;
    SemanticField f(cfg, 1);
    auto& ps = f.params();
    for (auto& t : ps.tensors()) std::fill(t.value.begin(), t.value.end(), 0.0);
    const Eigen::Vector3d n = Eigen::Vector3d(1.0, 2.0, 2.0) / 3.0;
    nn::Tensor& w0 = ps[ps.find("sdf0.weight")];
    nn::Tensor& b0 = ps[ps.find("sdf0.bias")];
    nn::Tensor& w1 = ps[ps.find("sdf1.weight")];
    // The field normalizes by the full extent (2 here), halving world gradients.
    for (int a = 0; a < 3; ++a) w0.matrix()(0, a) = n[a];
    b0.value[0] = 50.0;
    w1.matrix()(0, 0) = scale;
    return f;
}

TEST(Field, EikonalOfLinearProbes) {
    std::mt19937_64 rng(15);
    const Points x = random_points(20, rng);
    SemanticField unit = linear_probe(2.0);
    EXPECT_LE(unit.eikonal(x, 0.0), 1e-10);
    SemanticField twice = linear_probe(4.0);
    EXPECT_NEAR(twice.eikonal(x, 0.0), 1.0, 1e-9);
}

TEST(Losses, RankingValues) {
    Eigen::VectorXd p(2);
    p << 1.0, 1.0;
    EXPECT_EQ(ranking_loss(p, {{0, 1, 0}}, nullptr), 0.0);
    EXPECT_NEAR(ranking_loss(p, {{0, 1, 1}}, nullptr), std::log(2.0), 1e-12);
    p << 11.0, 1.0;
    EXPECT_NEAR(ranking_loss(p, {{0, 1, 1}}, nullptr), 4.54e-5, 1e-7);
    EXPECT_EQ(ordinal_label(2.0, 1.0, 0.5), 1);
    EXPECT_EQ(ordinal_label(1.0, 2.0, 0.5), -1);
    EXPECT_EQ(ordinal_label(1.0, 1.2, 0.5), 0);
    Eigen::VectorXd q(2);
    q << 3.7, -0.4;
    EXPECT_NEAR(ranking_loss(q, {{0, 1, -1}}, nullptr),
                ranking_loss((q.array() + 5.0).matrix(), {{0, 1, -1}}, nullptr), 1e-12);
}

TEST(Losses, SrcDepthValues) {
    std::mt19937_64 rng(16);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd d(10);
    for (double& v : d) v = g(rng);
    Mask valid(10, 1);
    valid[3] = valid[7] = 0;
    EXPECT_EQ(src_depth_loss(d, d, valid, nullptr), 0.0);
    EXPECT_NEAR(src_depth_loss((d.array() + 0.5).matrix(), d, valid, nullptr), 0.5, 1e-12);
    Eigen::VectorXd e(10);
    for (double& v : e) v = g(rng);
    double oracle = 0.0;
    for (int i = 0; i < 10; ++i)
        if (valid[static_cast<std::size_t>(i)]) oracle += std::abs(d[i] - e[i]);
    EXPECT_NEAR(src_depth_loss(d, e, valid, nullptr), oracle / 8.0, 1e-8);
    EXPECT_NEAR(src_depth_loss({d, d}, {e, d}, {valid, valid}, nullptr), oracle / 8.0, 1e-8);
}

TEST(Losses, TotalWithDefaultWeights) {
    const LossComponents ones{1, 1, 1, 1, 1, 1};
    EXPECT_NEAR(total_loss(ones, LossWeights{}), 12.21, 1e-12);
    EXPECT_EQ(total_loss(ones, LossWeights{0, 0, 0, 0, 0, 0}), 0.0);
    LossComponents bad = ones;
    bad.rank = std::nan("");
    try {
        total_loss(bad, LossWeights{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
        EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
    }
}

TEST(Mesh, SphereWithinTwoCells) {
    const Box box{{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
    const TriMesh m = extract_level_set([](const Points& p) { return (p.colwise().norm().array() - 0.5).matrix(); }, 64, box);
    const double cell = 2.0 / 63.0;
    double err = 0.0;
    for (const auto& v : m.vertices) err += std::abs(v.norm() - 0.5);
    EXPECT_LE(err / m.vertices.size(), 2.0 * cell);
    // Outward orientation: normals point away from the center.
    int outward = 0;
    for (const auto& t : m.triangles) {
        const Eigen::Vector3d a = m.vertices[t[0]];
        const Eigen::Vector3d n = (m.vertices[t[1]] - a).cross(m.vertices[t[2]] - a);
        outward += n.dot(a) > 0.0;
    }
    EXPECT_EQ(outward, static_cast<int>(m.triangles.size()));
}

TEST(Mesh, ConstantSdfIsEmpty) {
    const Box box{{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
    try {
        extract_level_set([](const Points& p) { return Eigen::RowVectorXd::Constant(p.cols(), 1.0); }, 16, box);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kEmptyMesh);
    }
    EXPECT_THROW(extract_level_set([](const Points& p) { return p.row(2); }, 4, box), Error);
}

TEST(Mesh, FieldVerticesLieOnLevelSet) {
    FieldConfig cfg = small_config();
    cfg.encoding.bands = 3;
    cfg.sdf_width = 32;
    SemanticField f(cfg, 17);
    f.init_plane(0.1, 200, 3);
    const warp::LabeledMesh m = extract_mesh(f, 24, cfg.bounds);
    m.validate();
    Points p(3, static_cast<Eigen::Index>(m.vertices.size()));
    for (std::size_t i = 0; i < m.vertices.size(); ++i) p.col(static_cast<Eigen::Index>(i)) = m.vertices[i];
    const double cell = 2.0 / 23.0;
    EXPECT_LE(f.sdf(p).cwiseAbs().maxCoeff(), 2.0 * cell);
}

TEST(Field, CheckpointRoundTrip) {
    std::mt19937_64 rng(18);
    SemanticField f(small_config(), 19);
    const auto path = testing::temp_path("field.ckpt");
    f.save(path);
    const SemanticField g = SemanticField::load(path);
    const Points x = random_points(10, rng);
    EXPECT_LT((f.sdf(x) - g.sdf(x)).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(f.beta(), g.beta(), 1e-7);
}

}  // namespace
}  // namespace semscene::semfield
