// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semscene/adapters/adapters.hpp"
#include "semscene/kernels/bvh.hpp"
#include "semscene/nn/layers.hpp"
#include "semscene/nn/params.hpp"
#include "semscene/scenekit/camera.hpp"
#include "semscene/scenekit/types.hpp"
#include "semscene/warp/warp.hpp"

namespace semscene::appearance {

using nn::FeatureMap;
using nn::Mat;
using Points = Eigen::Matrix3Xd;

struct AppearanceConfig {
    int plane_resolution = 64;
    int plane_channels = 16;
    int hidden = 64;
    int sky_resolution = 64;
    Box bounds;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Position-only color field: three axis-aligned feature planes (xy, xz, yz)
/// spanning the bounds, a two-hidden-layer ReLU MLP with sigmoid output, and a
/// sky image plane. The sky plane stands upright at y = bounds.hi.y and covers
/// x in center.x +- E, z in [lo.z, lo.z + 2E] with E the largest box extent;
/// lookups outside it reflect.
class AppearanceField {
public:
    explicit AppearanceField(const AppearanceConfig& cfg);

    static AppearanceField load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const AppearanceConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    int feature_dim() const { return 3 * cfg_.plane_channels; }

    /// Bilinear samples of the three planes, concatenated xy | xz | yz.
    /// Points outside the bounds are clamped onto them.
    Mat triplane_sample(const Points& x) const;
    /// Scatters d(feature) back onto the plane gradients.
    void triplane_backward(const Points& x, const Mat& dfeat);

    struct ColorCache {
        Points x;
        std::vector<Mat> inputs;  // input of each linear layer
        Mat rgb;
    };
    /// 3 x N colors in [0, 1].
    Mat colors(const Points& x, ColorCache* cache = nullptr) const;
    void colors_backward(const ColorCache& cache, const Mat& drgb);

    /// Continuous texel coordinates of the ray's crossing with the sky plane,
    /// before reflection.
    Eigen::Vector2d sky_coords(const Ray& ray) const;
    Eigen::Vector3d sky_color(const Eigen::Vector2d& coords) const;
    void sky_backward(const Eigen::Vector2d& coords, const Eigen::Vector3d& drgb);

private:
    AppearanceConfig cfg_;
    nn::ParamStore params_;
    int planes_[3] = {-1, -1, -1};
    int sky_ = -1;
    std::vector<int> weights_;
    std::vector<int> biases_;
};

/// Folds a continuous coordinate into [0, n - 1] by mirroring at the ends.
double reflect_coord(double s, int n);

/// Per-pixel first surface hit of the camera rays; misses are sky.
struct SurfaceHits {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> hit;
    Points points;             // 3 x pixels; zero for sky
    std::vector<double> depth;  // ray parameter; 0 for sky
    std::vector<Ray> rays;

    bool is_sky(std::size_t i) const { return hit[i] == 0; }
};

kernels::Bvh build_bvh(const warp::LabeledMesh& mesh);
SurfaceHits surface_intersect(const kernels::Bvh& bvh, std::span<const Ray> rays);
SurfaceHits surface_intersect(const kernels::Bvh& bvh, const Camera& cam);
/// Camera z-depth of the hits; sky pixels invalid.
DepthMap hit_depth(const SurfaceHits& hits, const Camera& cam);

/// Colors of every pixel as a 1 x 3 x H x W map.
FeatureMap render_hits(const AppearanceField& field, const SurfaceHits& hits,
                       AppearanceField::ColorCache* cache = nullptr);
void render_hits_backward(AppearanceField& field, const SurfaceHits& hits, const AppearanceField::ColorCache& cache,
                          const FeatureMap& drgb);
ColorImage render_appearance(const AppearanceField& field, const kernels::Bvh& bvh, const Camera& cam);

FeatureMap to_feature_map(const ColorImage& img);
ColorImage to_image(const FeatureMap& rgb);

// ---- losses ----

/// Mean squared difference over all entries.
double l2_loss(const FeatureMap& a, const FeatureMap& b, FeatureMap* grad_a);

/// Per level of a Gaussian pyramid (5-tap binomial blur, stride-2
/// subsampling): the image plus its Sobel x/y responses per channel. Borders
/// clamp.
std::vector<FeatureMap> perceptual_features(const FeatureMap& img, int levels = 3);
/// Sum over levels of the mean squared feature difference.
double perceptual_loss(const FeatureMap& a, const FeatureMap& b, FeatureMap* grad_a, int levels = 3);

/// Label-conditional per-pixel classifier with num_classes + 1 outputs; the
/// last class means "fake".
class Discriminator {
public:
    Discriminator(int num_classes, int width, std::uint64_t seed);

    int num_classes() const { return num_classes_; }
    int fake_class() const { return num_classes_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    struct Cache {
        FeatureMap x;
        FeatureMap a0;
        FeatureMap h0;
        FeatureMap a1;
        FeatureMap h1;
    };
    FeatureMap forward(const FeatureMap& img, Cache* cache = nullptr) const;
    /// Accumulates parameter gradients; returns d(loss)/d(img).
    FeatureMap backward(const Cache& cache, const FeatureMap& dlogits);

private:
    int num_classes_;
    nn::ParamStore params_;
    nn::Conv2d c0_;
    nn::Conv2d c1_;
    nn::Conv2d c2_;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean per-pixel cross-entropy; log-probabilities are clamped at
/// log(kProbabilityFloor). `labels` holds one class per pixel.
double pixel_cross_entropy(const FeatureMap& logits, const std::vector<int>& labels, FeatureMap* dlogits);

struct AdversarialLosses {
    double gen = 0.0;
    double disc = 0.0;
};

/// Generator loss: rendered pixels classified as their mask label, gradient
/// into `d_rendered` (discriminator gradients from this pass are discarded).
/// Discriminator loss: real pixels to their label plus rendered pixels to the
/// fake class, accumulated into the discriminator's gradients.
AdversarialLosses adversarial_step(Discriminator& disc, const FeatureMap& rendered, const FeatureMap& pseudo_gt,
                                   const SemanticMask& mask, FeatureMap* d_rendered);

// ---- training ----

struct AppearanceView {
    Camera camera;
    SemanticMask mask;
    ColorImage target;
};

/// Pseudo ground truth: every mask through the synthesizer with one style seed.
std::vector<AppearanceView> make_appearance_views(const adapters::SynthesizerAdapter& synth,
                                                  const std::vector<Camera>& cameras,
                                                  const std::vector<SemanticMask>& masks, std::uint64_t style_seed);

struct TrainConfig {
    AppearanceConfig field;
    int iterations = 1500;
    double learning_rate = 5e-3;
    double disc_learning_rate = 4e-4;
    double w_adv = 1.0;
    double w_l2 = 10.0;
    double w_perc = 10.0;
    int disc_width = 16;
    int log_every = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainLog {
    std::vector<double> losses;  // mean weighted generator loss per window
};

/// Geometry stays fixed: the mesh only decides where rays stop.
AppearanceField train_appearance(const kernels::Bvh& bvh, const std::vector<AppearanceView>& views,
                                 const TrainConfig& cfg, TrainLog* log = nullptr);

// ---- metrics ----

double psnr(const ColorImage& a, const ColorImage& b);

/// Median over ordered view pairs and co-visible pixels of the mean absolute
/// RGB difference between a pixel and its reprojection (nearest pixel) in the
/// other view. Co-visible: valid depth in both and z agreement within
/// `rel_tol`. Throws kUndefinedMetric when no pixel qualifies.
double reprojected_color_difference(const std::vector<ColorImage>& images, const std::vector<DepthMap>& depths,
                                    const std::vector<Camera>& cameras, double rel_tol = 0.02);

}  // namespace semscene::appearance
