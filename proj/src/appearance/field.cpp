// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "semscene/appearance/appearance.hpp"
#include "semscene/common/error.hpp"

namespace semscene::appearance {

namespace {

constexpr const char* kMetaName = "appearance.meta";
constexpr std::size_t kMetaSize = 10;
constexpr int kPlaneAxes[3][2] = {{0, 1}, {0, 2}, {1, 2}};

struct Bilinear {
    int i0 = 0;
    int j0 = 0;
    double fu = 0.0;
    double fv = 0.0;
};

Bilinear cell(double u, double v, int n) {
    Bilinear b;
    b.i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
    b.j0 = std::min(static_cast<int>(std::floor(v)), n - 2);
    b.fu = u - b.i0;
    b.fv = v - b.j0;
    return b;
}

double grid_coord(double value, double lo, double extent, int n) {
    return std::clamp((value - lo) / extent * (n - 1), 0.0, static_cast<double>(n - 1));
}

}  // namespace

void AppearanceConfig::validate() const {
    require(plane_resolution >= 2 && sky_resolution >= 2, "plane resolutions must be at least 2");
    require(plane_channels >= 1 && hidden >= 1, "appearance widths must be positive");
    require((bounds.extent().array() > 0.0).all(), "appearance bounds must have positive extent");
}

AppearanceField::AppearanceField(const AppearanceConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed * 0x9E3779B97F4A7C15ULL + 0xA11CE);
    const int r = cfg_.plane_resolution;
    const char* names[3] = {"triplane.xy", "triplane.xz", "triplane.yz"};
    for (int k = 0; k < 3; ++k) {
        planes_[k] = params_.add(names[k], {r * r * cfg_.plane_channels});
        nn::init_normal(params_[planes_[k]], 0.0, 0.1, rng);
    }
    const int dims[4] = {feature_dim(), cfg_.hidden, cfg_.hidden, 3};
    for (int l = 0; l < 3; ++l) {
        int w = -1;
        int b = -1;
        nn::add_linear(params_, "color" + std::to_string(l), dims[l], dims[l + 1], rng, w, b);
        weights_.push_back(w);
        biases_.push_back(b);
    }
    const int rs = cfg_.sky_resolution;
    sky_ = params_.add("sky", {rs * rs * 3});
    std::fill(params_[sky_].value.begin(), params_[sky_].value.end(), 0.5);
}

AppearanceField AppearanceField::load(const std::filesystem::path& path) {
    const nn::ParamStore stored = nn::load_checkpoint(path);
    const int meta = stored.find(kMetaName);
    if (meta < 0 || stored[meta].size() != kMetaSize) fail(ErrorKind::kFormat, "not an appearance checkpoint");
    const auto& m = stored[meta].value;
    AppearanceConfig cfg;
    cfg.plane_resolution = static_cast<int>(m[0]);
    cfg.plane_channels = static_cast<int>(m[1]);
    cfg.hidden = static_cast<int>(m[2]);
    cfg.sky_resolution = static_cast<int>(m[3]);
    cfg.bounds.lo = Eigen::Vector3d(m[4], m[5], m[6]);
    cfg.bounds.hi = Eigen::Vector3d(m[7], m[8], m[9]);
    AppearanceField field(cfg);
    for (auto& t : field.params_.tensors()) {
        const int i = stored.find(t.name);
        if (i < 0 || stored[i].shape != t.shape) fail(ErrorKind::kFormat, "appearance checkpoint lacks " + t.name);
        t.value = stored[i].value;
    }
    return field;
}

void AppearanceField::save(const std::filesystem::path& path) const {
    nn::ParamStore out = params_;
    const int meta = out.add(kMetaName, {static_cast<int>(kMetaSize)});
    const Box& b = cfg_.bounds;
    out[meta].value = {static_cast<double>(cfg_.plane_resolution), static_cast<double>(cfg_.plane_channels),
                       static_cast<double>(cfg_.hidden), static_cast<double>(cfg_.sky_resolution),
                       b.lo.x(), b.lo.y(), b.lo.z(), b.hi.x(), b.hi.y(), b.hi.z()};
    nn::save_checkpoint(path, out);
}

Mat AppearanceField::triplane_sample(const Points& x) const {
    const int r = cfg_.plane_resolution;
    const int c = cfg_.plane_channels;
    const Eigen::Vector3d lo = cfg_.bounds.lo;
    const Eigen::Vector3d ext = cfg_.bounds.extent();
    Mat out(feature_dim(), x.cols());
    for (Eigen::Index n = 0; n < x.cols(); ++n) {
        for (int k = 0; k < 3; ++k) {
            const int a = kPlaneAxes[k][0];
            const int b = kPlaneAxes[k][1];
            const Bilinear q = cell(grid_coord(x(a, n), lo[a], ext[a], r), grid_coord(x(b, n), lo[b], ext[b], r), r);
            const double* g = params_[planes_[k]].value.data();
            const double w00 = (1 - q.fu) * (1 - q.fv);
            const double w10 = q.fu * (1 - q.fv);
            const double w01 = (1 - q.fu) * q.fv;
            const double w11 = q.fu * q.fv;
            const double* p00 = g + (static_cast<std::size_t>(q.j0) * r + q.i0) * c;
            const double* p10 = p00 + c;
            const double* p01 = p00 + static_cast<std::size_t>(r) * c;
            const double* p11 = p01 + c;
            for (int ch = 0; ch < c; ++ch)
                out(k * c + ch, n) = w00 * p00[ch] + w10 * p10[ch] + w01 * p01[ch] + w11 * p11[ch];
        }
    }
    return out;
}

void AppearanceField::triplane_backward(const Points& x, const Mat& dfeat) {
    const int r = cfg_.plane_resolution;
    const int c = cfg_.plane_channels;
    const Eigen::Vector3d lo = cfg_.bounds.lo;
    const Eigen::Vector3d ext = cfg_.bounds.extent();
    for (Eigen::Index n = 0; n < x.cols(); ++n) {
        for (int k = 0; k < 3; ++k) {
            const int a = kPlaneAxes[k][0];
            const int b = kPlaneAxes[k][1];
            const Bilinear q = cell(grid_coord(x(a, n), lo[a], ext[a], r), grid_coord(x(b, n), lo[b], ext[b], r), r);
            double* g = params_[planes_[k]].grad.data();
            const double ws[4] = {(1 - q.fu) * (1 - q.fv), q.fu * (1 - q.fv), (1 - q.fu) * q.fv, q.fu * q.fv};
            double* ps[4];
            ps[0] = g + (static_cast<std::size_t>(q.j0) * r + q.i0) * c;
            ps[1] = ps[0] + c;
            ps[2] = ps[0] + static_cast<std::size_t>(r) * c;
            ps[3] = ps[2] + c;
            for (int ch = 0; ch < c; ++ch) {
                const double d = dfeat(k * c + ch, n);
                for (int t = 0; t < 4; ++t) ps[t][ch] += ws[t] * d;
            }
        }
    }
}

Mat AppearanceField::colors(const Points& x, ColorCache* cache) const {
    Mat h = triplane_sample(x);
    if (cache) {
        cache->x = x;
        cache->inputs.clear();
    }
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Mat a;
        nn::linear_forward(params_[weights_[l]], params_[biases_[l]], h, a);
        if (cache) cache->inputs.push_back(std::move(h));
        h = l + 1 < weights_.size() ? Mat(a.cwiseMax(0.0)) : Mat((1.0 + (-a.array()).exp()).inverse().matrix());
    }
    if (cache) cache->rgb = h;
    return h;
}

void AppearanceField::colors_backward(const ColorCache& cache, const Mat& drgb) {
    Mat g = (drgb.array() * cache.rgb.array() * (1.0 - cache.rgb.array())).matrix();
    for (std::size_t l = weights_.size(); l-- > 0;) {
        Mat dh;
        nn::linear_backward(params_[weights_[l]], params_[biases_[l]], cache.inputs[l], g, &dh);
        if (l > 0) g = (dh.array() * (cache.inputs[l].array() > 0.0).cast<double>()).matrix();
        else g = std::move(dh);
    }
    triplane_backward(cache.x, g);
}

double reflect_coord(double s, int n) {
    const double period = 2.0 * (n - 1);
    double m = std::fmod(s, period);
    if (m < 0.0) m += period;
    return m > n - 1 ? period - m : m;
}

Eigen::Vector2d AppearanceField::sky_coords(const Ray& ray) const {
    const Box& b = cfg_.bounds;
    const double e = b.extent().maxCoeff();
    const double t = (b.hi.y() - ray.origin.y()) / std::max(ray.dir.y(), 1e-6);
    const Eigen::Vector3d p = ray.origin + t * ray.dir;
    const int n = cfg_.sky_resolution;
    return {(p.x() - (b.center().x() - e)) / (2.0 * e) * (n - 1), (p.z() - b.lo.z()) / (2.0 * e) * (n - 1)};
}

Eigen::Vector3d AppearanceField::sky_color(const Eigen::Vector2d& coords) const {
    const int n = cfg_.sky_resolution;
    const Bilinear q = cell(reflect_coord(coords.x(), n), reflect_coord(coords.y(), n), n);
    const double* s = params_[sky_].value.data();
    Eigen::Vector3d out;
    for (int ch = 0; ch < 3; ++ch) {
        auto at = [&](int i, int j) { return s[(static_cast<std::size_t>(j) * n + i) * 3 + ch]; };
        const double v = (1 - q.fu) * (1 - q.fv) * at(q.i0, q.j0) + q.fu * (1 - q.fv) * at(q.i0 + 1, q.j0) +
                         (1 - q.fu) * q.fv * at(q.i0, q.j0 + 1) + q.fu * q.fv * at(q.i0 + 1, q.j0 + 1);
        out[ch] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

void AppearanceField::sky_backward(const Eigen::Vector2d& coords, const Eigen::Vector3d& drgb) {
    const int n = cfg_.sky_resolution;
    const Bilinear q = cell(reflect_coord(coords.x(), n), reflect_coord(coords.y(), n), n);
    const Eigen::Vector3d value = sky_color(coords);
    double* g = params_[sky_].grad.data();
    for (int ch = 0; ch < 3; ++ch) {
        if (value[ch] <= 0.0 || value[ch] >= 1.0) continue;
        auto at = [&](int i, int j) -> double& { return g[(static_cast<std::size_t>(j) * n + i) * 3 + ch]; };
        at(q.i0, q.j0) += (1 - q.fu) * (1 - q.fv) * drgb[ch];
        at(q.i0 + 1, q.j0) += q.fu * (1 - q.fv) * drgb[ch];
        at(q.i0, q.j0 + 1) += (1 - q.fu) * q.fv * drgb[ch];
        at(q.i0 + 1, q.j0 + 1) += q.fu * q.fv * drgb[ch];
    }
}

kernels::Bvh build_bvh(const warp::LabeledMesh& mesh) { return kernels::Bvh(mesh.vertices, mesh.triangles); }

SurfaceHits surface_intersect(const kernels::Bvh& bvh, std::span<const Ray> rays) {
    SurfaceHits out;
    out.height = 1;
    out.width = static_cast<int>(rays.size());
    out.rays.assign(rays.begin(), rays.end());
    const std::vector<kernels::RayHit> hits = kernels::intersect_all(bvh, rays);
    out.hit.resize(rays.size());
    out.depth.assign(rays.size(), 0.0);
    out.points = Points::Zero(3, static_cast<Eigen::Index>(rays.size()));
    for (std::size_t i = 0; i < rays.size(); ++i) {
        out.hit[i] = hits[i].hit ? 1 : 0;
        if (!hits[i].hit) continue;
        out.depth[i] = hits[i].t;
        out.points.col(static_cast<Eigen::Index>(i)) = rays[i].origin + hits[i].t * rays[i].dir;
    }
    return out;
}

SurfaceHits surface_intersect(const kernels::Bvh& bvh, const Camera& cam) {
    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(cam.height()) * cam.width());
    for (int y = 0; y < cam.height(); ++y)
        for (int x = 0; x < cam.width(); ++x) rays.push_back(cam.pixel_ray(x, y));
    SurfaceHits hits = surface_intersect(bvh, rays);
    hits.height = cam.height();
    hits.width = cam.width();
    return hits;
}

DepthMap hit_depth(const SurfaceHits& hits, const Camera& cam) {
    DepthMap d(hits.height, hits.width);
    for (int y = 0; y < hits.height; ++y)
        for (int x = 0; x < hits.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * hits.width + x;
            if (hits.is_sky(i)) continue;
            const double z = cam.to_camera(hits.points.col(static_cast<Eigen::Index>(i))).z();
            if (z > 0.0) d.set(y, x, static_cast<float>(z));
        }
    return d;
}

namespace {

Points hit_points(const SurfaceHits& hits) {
    Eigen::Index n = 0;
    for (auto h : hits.hit) n += h;
    Points p(3, n);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < hits.hit.size(); ++i)
        if (hits.hit[i]) p.col(k++) = hits.points.col(static_cast<Eigen::Index>(i));
    return p;
}

}  // namespace

FeatureMap render_hits(const AppearanceField& field, const SurfaceHits& hits, AppearanceField::ColorCache* cache) {
    const Mat rgb = field.colors(hit_points(hits), cache);
    FeatureMap out(1, 3, hits.height, hits.width);
    const std::size_t plane = out.plane();
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < hits.hit.size(); ++i) {
        const Eigen::Vector3d c = hits.hit[i] ? Eigen::Vector3d(rgb.col(k++)) : field.sky_color(field.sky_coords(hits.rays[i]));
        for (int ch = 0; ch < 3; ++ch) out.data[ch * plane + i] = c[ch];
    }
    return out;
}

void render_hits_backward(AppearanceField& field, const SurfaceHits& hits, const AppearanceField::ColorCache& cache,
                          const FeatureMap& drgb) {
    const std::size_t plane = drgb.plane();
    Mat dcol(3, cache.x.cols());
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < hits.hit.size(); ++i) {
        const Eigen::Vector3d d(drgb.data[i], drgb.data[plane + i], drgb.data[2 * plane + i]);
        if (hits.hit[i]) dcol.col(k++) = d;
        else field.sky_backward(field.sky_coords(hits.rays[i]), d);
    }
    field.colors_backward(cache, dcol);
}

ColorImage render_appearance(const AppearanceField& field, const kernels::Bvh& bvh, const Camera& cam) {
    return to_image(render_hits(field, surface_intersect(bvh, cam)));
}

FeatureMap to_feature_map(const ColorImage& img) {
    FeatureMap out(1, 3, img.height(), img.width());
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) out.at(0, ch, y, x) = img(y, x, ch);
    return out;
}

ColorImage to_image(const FeatureMap& rgb) {
    require(rgb.n == 1 && rgb.c == 3, "expected a 1 x 3 x H x W color map");
    ColorImage img(rgb.h, rgb.w);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < rgb.h; ++y)
            for (int x = 0; x < rgb.w; ++x)
                img(y, x, ch) = static_cast<float>(std::clamp(rgb.at(0, ch, y, x), 0.0, 1.0));
    return img;
}

}  // namespace semscene::appearance
