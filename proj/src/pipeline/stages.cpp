// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/pipeline/stages.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "semscene/adapters/adapters.hpp"
#include "semscene/appearance/appearance.hpp"
#include "semscene/common/error.hpp"
#include "semscene/common/hash.hpp"
#include "semscene/inpaint/inpainter.hpp"
#include "semscene/pipeline/corpus.hpp"
#include "semscene/scenekit/io.hpp"
#include "semscene/scenekit/oracle_scene.hpp"
#include "semscene/semfield/fusion.hpp"
#include "semscene/semfield/mesh.hpp"
#include "semscene/warp/warp.hpp"

namespace semscene::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.txt";
constexpr int kEikonalProbePoints = 2000;

std::string indexed(const char* stem, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, i, ext);
    return buf;
}

template <typename F>
void write_atomic(const fs::path& path, F&& write) {
    fs::path part = path;
    part += ".part";
    write(part);
    fs::rename(part, path);
}

void write_manifest(const fs::path& dir, const std::vector<std::string>& lines) {
    write_atomic(dir / kManifest, [&](const fs::path& p) {
        std::ofstream out(p);
        for (const std::string& l : lines) out << l << "\n";
        if (!out) fail(ErrorKind::kStageFailure, "cannot write " + p.string());
    });
}

std::vector<std::string> read_manifest(const fs::path& dir) {
    std::ifstream in(dir / kManifest);
    if (!in) fail(ErrorKind::kStageFailure, "missing " + (dir / kManifest).string() + "; run the producing stage first");
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) lines.push_back(l);
    return lines;
}

bool has_manifest(const fs::path& dir) { return fs::exists(dir / kManifest); }

struct Logger {
    std::ostream* out;
    const char* stage;
    void operator()(const std::string& msg) const {
        if (out) *out << "[" << stage << "] " << msg << std::endl;
    }
};

OracleScene scene_of(const PipelineConfig& cfg) {
    return make_oracle_scene(cfg.scene_seed, cfg.num_classes, default_scene_bounds());
}

adapters::AdapterSpec with_workdir(adapters::AdapterSpec spec, const Layout& L) {
    spec.workdir = L.root / "adapter_io";
    if (spec.name == "external") fs::create_directories(spec.workdir);
    return spec;
}

std::unique_ptr<adapters::SynthesizerAdapter> synthesizer(const PipelineConfig& cfg, const Layout& L) {
    return adapters::make_synthesizer(with_workdir(cfg.synthesizer, L), cfg.texture_amplitude);
}

std::unique_ptr<adapters::DepthAdapter> depth_adapter(const PipelineConfig& cfg, const Layout& L, std::uint64_t seed,
                                                      bool metric) {
    adapters::StubDepthConfig sd;
    sd.noise_level = cfg.depth_noise;
    sd.seed = seed;
    sd.fixed_affine = metric;
    return adapters::make_depth(with_workdir(cfg.depth, L), sd);
}

semfield::SkySemantics sky_of(const PipelineConfig& cfg) { return {cfg.num_classes, cfg.fusion.sky_class}; }

// Training views: index 0 is the source camera.
std::vector<Camera> train_cameras(const Layout& L) { return load_cameras(L.cameras()); }

std::vector<SemanticMask> load_masks(const fs::path& dir, const char* stem, int n, int classes) {
    std::vector<SemanticMask> out;
    for (int i = 0; i < n; ++i) out.push_back(load_mask(dir / indexed(stem, i, "pgm"), classes));
    return out;
}

std::vector<DepthMap> load_depths(const fs::path& dir, const char* stem, int n) {
    std::vector<DepthMap> out;
    for (int i = 0; i < n; ++i) out.push_back(load_depth(dir / indexed(stem, i, "sdpt")));
    return out;
}

// ---------------------------------------------------------------- stages

void gen_scene(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    fs::create_directories(L.scene_dir());
    const OracleScene scene = scene_of(cfg);
    const Intrinsics k = Intrinsics::from_fov(cfg.resolution, cfg.resolution, cfg.fov_deg);
    const Camera src = Camera::look_at(cfg.eye, cfg.target, Eigen::Vector3d::UnitZ(), k, cfg.resolution, cfg.resolution);
    const Eigen::Vector3d half = Eigen::Vector3d::Constant(0.5 * cfg.pose_box);
    const Box box{cfg.eye - half, cfg.eye + half};
    std::vector<Camera> cams{src};
    for (const Camera& c : sample_cameras(box, cfg.target, cfg.views, mix_seed(cfg.seed, 10), k, cfg.resolution,
                                          cfg.resolution))
        cams.push_back(c);
    const std::vector<Camera> holdout =
        sample_cameras(box, cfg.target, cfg.holdout_views, mix_seed(cfg.seed, 11), k, cfg.resolution, cfg.resolution);

    const SemanticMask mask = render_oracle(scene, src).first;
    const ColorImage image = synthesizer(cfg, L)->synthesize(mask, cfg.style_seed);
    const adapters::OracleHandle oracle{&scene, src};
    const DepthMap depth = depth_adapter(cfg, L, mix_seed(cfg.seed, 12), true)->estimate(image, &oracle);

    save_mask(L.scene_dir() / "source_mask.pgm", mask);
    save_image(L.scene_dir() / "source_image.ppm", image);
    save_depth(L.scene_dir() / "source_depth.sdpt", depth);
    save_cameras(L.cameras(), cams);
    save_cameras(L.holdout_cameras(), holdout);
    write_manifest(L.scene_dir(), {"views " + std::to_string(cams.size()), "holdout " + std::to_string(holdout.size())});
    log("source view and " + std::to_string(cfg.views) + " novel cameras written");
}

void warpback_data(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    fs::create_directories(L.warpback_dir());
    const auto pairs = make_warpback_corpus(cfg.corpus);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        save_mask(L.warpback_dir() / indexed("corrupted", static_cast<int>(i), "pgm"), pairs[i].corrupted);
        save_mask(L.warpback_dir() / indexed("target", static_cast<int>(i), "pgm"), pairs[i].target);
    }
    write_manifest(L.warpback_dir(), {"pairs " + std::to_string(pairs.size())});
    log(std::to_string(pairs.size()) + " warp-back pairs written");
}

int manifest_count(const fs::path& dir, const std::string& key) {
    for (const std::string& line : read_manifest(dir)) {
        std::istringstream ls(line);
        std::string k;
        int n = 0;
        if (ls >> k >> n && k == key) return n;
    }
    fail(ErrorKind::kStageFailure, "manifest in " + dir.string() + " lacks '" + key + "'");
}

void train_inpainter_stage(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    const int n = manifest_count(L.warpback_dir(), "pairs");
    std::vector<inpaint::TrainingPair> pairs;
    for (int i = 0; i < n; ++i)
        pairs.push_back({load_mask(L.warpback_dir() / indexed("corrupted", i, "pgm"), cfg.num_classes),
                         load_mask(L.warpback_dir() / indexed("target", i, "pgm"), cfg.num_classes)});
    log("training on " + std::to_string(n) + " pairs for " + std::to_string(cfg.inpaint.iterations) + " iterations");
    inpaint::TrainLog tlog;
    const inpaint::Inpainter model = inpaint::train_inpainter(pairs, cfg.inpaint, &tlog);
    if (!tlog.checkpoint_losses.empty()) log("final window loss " + std::to_string(tlog.checkpoint_losses.back()));
    write_atomic(L.inpainter(), [&](const fs::path& p) { model.save(p); });
}

void prepare_views(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    fs::create_directories(L.views_dir());
    const OracleScene scene = scene_of(cfg);
    const std::vector<Camera> cams = train_cameras(L);
    const SemanticMask src_mask = load_mask(L.scene_dir() / "source_mask.pgm", cfg.num_classes);
    const DepthMap src_depth = load_depth(L.scene_dir() / "source_depth.sdpt");
    const inpaint::Inpainter model = inpaint::Inpainter::load(L.inpainter());
    const auto synth = synthesizer(cfg, L);
    const Label sky = static_cast<Label>(cfg.fusion.sky_class);

    for (int j = 0; j < static_cast<int>(cams.size()); ++j) {
        SemanticMask warped = src_mask;
        SemanticMask raw = src_mask;
        DepthMap dhat = src_depth;
        DepthMap dsrc = src_depth;
        if (j > 0) {
            const warp::WarpResult w = warp::warp_mask(src_mask, src_depth, cams[0], cams[j]);
            warped = w.mask;
            dsrc = w.depth;
            raw = inpaint::inpaint(model, warped);
            const ColorImage image = synth->synthesize(raw, cfg.style_seed);
            const adapters::OracleHandle oracle{&scene, cams[j]};
            dhat = depth_adapter(cfg, L, mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(j)), false)
                       ->estimate(image, &oracle);
        }
        for (int y = 0; y < raw.height(); ++y)
            for (int x = 0; x < raw.width(); ++x)
                if (warped(y, x) == sky || warped.is_hole(y, x)) dsrc.invalidate(y, x);
        save_mask(L.views_dir() / indexed("warped", j, "pgm"), warped);
        save_mask(L.views_dir() / indexed("raw", j, "pgm"), raw);
        save_depth(L.views_dir() / indexed("depth", j, "sdpt"), dhat);
        save_depth(L.views_dir() / indexed("srcdepth", j, "sdpt"), dsrc);
    }
    write_manifest(L.views_dir(), {"views " + std::to_string(cams.size())});
    log("warped and inpainted " + std::to_string(cams.size() - 1) + " novel views");
}

void fuse_field(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    const std::vector<Camera> cams = train_cameras(L);
    const int n = manifest_count(L.views_dir(), "views");
    require(n == static_cast<int>(cams.size()), "view manifest does not match the cameras");
    std::vector<semfield::FusionView> views;
    for (int j = 0; j < n; ++j)
        views.push_back({cams[static_cast<std::size_t>(j)],
                         load_mask(L.views_dir() / indexed("raw", j, "pgm"), cfg.num_classes),
                         load_depth(L.views_dir() / indexed("depth", j, "sdpt")),
                         load_depth(L.views_dir() / indexed("srcdepth", j, "sdpt"))});
    log("fusing " + std::to_string(n) + " views for " + std::to_string(cfg.fusion.iterations) + " iterations");
    semfield::FusionLog flog;
    const semfield::SemanticField field = semfield::train_semantic_field(views, cfg.fusion, &flog);
    if (!flog.losses.empty()) log("final window loss " + std::to_string(flog.losses.back()));
    write_atomic(L.semfield(), [&](const fs::path& p) { field.save(p); });
}

void render_fused(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    fs::create_directories(L.fused_dir());
    const semfield::SemanticField field = semfield::SemanticField::load(L.semfield());
    const std::vector<Camera> cams = train_cameras(L);
    const std::vector<Camera> holdout = load_cameras(L.holdout_cameras());
    const auto views = semfield::render_semantic_views(field, cams, sky_of(cfg), cfg.fusion.sampling);
    const auto held = semfield::render_semantic_views(field, holdout, sky_of(cfg), cfg.fusion.sampling);
    for (std::size_t i = 0; i < views.size(); ++i) {
        save_mask(L.fused_dir() / indexed("mask", static_cast<int>(i), "pgm"), views[i].first);
        save_depth(L.fused_dir() / indexed("depth", static_cast<int>(i), "sdpt"), views[i].second);
    }
    for (std::size_t i = 0; i < held.size(); ++i) {
        save_mask(L.fused_dir() / indexed("holdout_mask", static_cast<int>(i), "pgm"), held[i].first);
        save_depth(L.fused_dir() / indexed("holdout_depth", static_cast<int>(i), "sdpt"), held[i].second);
    }
    write_manifest(L.fused_dir(),
                   {"views " + std::to_string(views.size()), "holdout " + std::to_string(held.size())});
    log("rendered fused masks for " + std::to_string(views.size() + held.size()) + " cameras");
}

void extract_field_mesh(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    const semfield::SemanticField field = semfield::SemanticField::load(L.semfield());
    const warp::LabeledMesh mesh = semfield::extract_mesh(field, cfg.mesh_resolution, field.config().bounds);
    write_atomic(L.mesh(), [&](const fs::path& p) { warp::save_mesh(p, mesh); });
    log("mesh with " + std::to_string(mesh.triangles.size()) + " triangles");
}

void build_semfield(const PipelineConfig& cfg, const Layout& L, bool resume, const Logger& log) {
    if (!resume || !has_manifest(L.views_dir())) prepare_views(cfg, L, log);
    if (!resume || !fs::exists(L.semfield())) fuse_field(cfg, L, log);
    if (!resume || !has_manifest(L.fused_dir())) render_fused(cfg, L, log);
    if (!resume || !fs::exists(L.mesh())) extract_field_mesh(cfg, L, log);
}

void train_appearance_stage(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    fs::create_directories(L.appearance_dir());
    const std::vector<Camera> cams = train_cameras(L);
    const int n = manifest_count(L.fused_dir(), "views");
    const std::vector<SemanticMask> masks = load_masks(L.fused_dir(), "mask", n, cfg.num_classes);
    const kernels::Bvh bvh = appearance::build_bvh(warp::load_mesh(L.mesh()));
    const auto views = appearance::make_appearance_views(*synthesizer(cfg, L), cams, masks, cfg.style_seed);
    for (int i = 0; i < n; ++i)
        save_image(L.appearance_dir() / indexed("pseudo", i, "ppm"), views[static_cast<std::size_t>(i)].target);
    log("training appearance on " + std::to_string(n) + " views for " + std::to_string(cfg.appearance.iterations) +
        " iterations");
    appearance::TrainLog alog;
    const appearance::AppearanceField field = appearance::train_appearance(bvh, views, cfg.appearance, &alog);
    if (!alog.losses.empty()) log("final window loss " + std::to_string(alog.losses.back()));
    write_atomic(L.appearance(), [&](const fs::path& p) { field.save(p); });
}

std::vector<Camera> frame_cameras(const PipelineConfig& cfg) {
    const Intrinsics k = Intrinsics::from_fov(cfg.resolution, cfg.resolution, cfg.fov_deg);
    std::vector<Camera> cams;
    for (int f = 0; f < cfg.frames; ++f) {
        const double s = cfg.frames == 1 ? 0.0 : -0.5 + static_cast<double>(f) / (cfg.frames - 1);
        const Eigen::Vector3d eye = cfg.eye + Eigen::Vector3d(s * cfg.pose_box, 0.0, 0.0);
        cams.push_back(Camera::look_at(eye, cfg.target, Eigen::Vector3d::UnitZ(), k, cfg.resolution, cfg.resolution));
    }
    return cams;
}

void render_frames(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    fs::create_directories(L.frames_dir());
    const appearance::AppearanceField field = appearance::AppearanceField::load(L.appearance());
    const kernels::Bvh bvh = appearance::build_bvh(warp::load_mesh(L.mesh()));
    std::vector<std::string> index;
    const std::vector<Camera> cams = frame_cameras(cfg);
    for (std::size_t f = 0; f < cams.size(); ++f) {
        const std::string name = indexed("frame", static_cast<int>(f), "ppm");
        save_image(L.frames_dir() / name, appearance::render_appearance(field, bvh, cams[f]));
        index.push_back(name);
    }
    save_cameras(L.frames_dir() / "cameras.txt", cams);
    write_manifest(L.frames_dir(), index);
    log(std::to_string(cams.size()) + " frames written");
}

void evaluate(const PipelineConfig& cfg, const Layout& L, const Logger& log) {
    const OracleScene scene = scene_of(cfg);
    const std::vector<Camera> cams = train_cameras(L);
    const std::vector<Camera> holdout = load_cameras(L.holdout_cameras());
    const int n = static_cast<int>(cams.size());
    const int nh = static_cast<int>(holdout.size());
    const auto fused = load_masks(L.fused_dir(), "mask", n, cfg.num_classes);
    const auto fused_depth = load_depths(L.fused_dir(), "depth", n);
    const auto held = load_masks(L.fused_dir(), "holdout_mask", nh, cfg.num_classes);
    const auto held_depth = load_depths(L.fused_dir(), "holdout_depth", nh);
    const auto raw = load_masks(L.views_dir(), "raw", n, cfg.num_classes);

    EvalReport report;
    std::vector<SemanticMask> oracle_masks;
    std::vector<SemanticMask> all_fused;
    double train_acc = 0.0;
    double raw_acc = 0.0;
    for (int i = 0; i < n; ++i) {
        oracle_masks.push_back(render_oracle(scene, cams[static_cast<std::size_t>(i)]).first);
        const double acc = label_accuracy(fused[static_cast<std::size_t>(i)], oracle_masks.back());
        char key[48];
        std::snprintf(key, sizeof(key), "accuracy.view_%02d", i);
        report.set(key, acc);
        train_acc += acc / n;
        raw_acc += label_accuracy(raw[static_cast<std::size_t>(i)], oracle_masks.back()) / n;
        all_fused.push_back(fused[static_cast<std::size_t>(i)]);
    }
    std::vector<SemanticMask> oracle_all = oracle_masks;
    std::vector<DepthMap> oracle_held_depth;
    double held_acc = 0.0;
    for (int i = 0; i < nh; ++i) {
        auto [m, d] = render_oracle(scene, holdout[static_cast<std::size_t>(i)]);
        const double acc = label_accuracy(held[static_cast<std::size_t>(i)], m);
        char key[48];
        std::snprintf(key, sizeof(key), "accuracy.holdout_%02d", i);
        report.set(key, acc);
        held_acc += acc / nh;
        oracle_all.push_back(std::move(m));
        oracle_held_depth.push_back(std::move(d));
        all_fused.push_back(held[static_cast<std::size_t>(i)]);
    }
    report.set("accuracy.train_mean", train_acc);
    report.set("accuracy.raw_mean", raw_acc);
    report.set("accuracy.holdout_mean", held_acc);
    report.set("nll.fused", nll_score(all_fused, oracle_all));
    report.set("nll.raw", nll_score(raw, oracle_masks));
    report.set("depth.abs_rel", aligned_abs_rel(held_depth, oracle_held_depth));
    if (n >= 2) {
        report.set("vsc.fused", vsc_score(fused, fused_depth, cams));
        report.set("vsc.raw", vsc_score(raw, fused_depth, cams));
    }

    {
        semfield::SemanticField field = semfield::SemanticField::load(L.semfield());
        const Box& b = field.config().bounds;
        std::mt19937_64 rng(mix_seed(cfg.seed, 200));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        semfield::Points pts(3, kEikonalProbePoints);
        for (int i = 0; i < kEikonalProbePoints; ++i)
            for (int a = 0; a < 3; ++a) pts(a, i) = b.lo[a] + u01(rng) * (b.hi[a] - b.lo[a]);
        report.set("geometry.eikonal", field.eikonal(pts, 0.0));
    }

    const appearance::AppearanceField app = appearance::AppearanceField::load(L.appearance());
    const kernels::Bvh bvh = appearance::build_bvh(warp::load_mesh(L.mesh()));
    std::vector<ColorImage> rendered;
    std::vector<ColorImage> pseudo;
    std::vector<DepthMap> depths;
    double psnr = 0.0;
    for (int i = 0; i < n; ++i) {
        const Camera& c = cams[static_cast<std::size_t>(i)];
        const appearance::SurfaceHits hits = appearance::surface_intersect(bvh, c);
        rendered.push_back(appearance::to_image(appearance::render_hits(app, hits)));
        pseudo.push_back(load_image(L.appearance_dir() / indexed("pseudo", i, "ppm")));
        depths.push_back(appearance::hit_depth(hits, c));
        psnr += appearance::psnr(rendered.back(), pseudo.back()) / n;
    }
    report.set("appearance.psnr_train", psnr);
    if (n >= 2) {
        report.set("color.rendered", appearance::reprojected_color_difference(rendered, depths, cams));
        report.set("color.pseudo_gt", appearance::reprojected_color_difference(pseudo, depths, cams));
    }
    write_atomic(L.report(), [&](const fs::path& p) { report.save(p); });
    log("report written to " + L.report().string());
}

void remove_outputs(const Layout& L, Stage stage) {
    switch (stage) {
    case Stage::kGenScene: fs::remove_all(L.scene_dir()); break;
    case Stage::kWarpbackData: fs::remove_all(L.warpback_dir()); break;
    case Stage::kTrainInpainter: fs::remove(L.inpainter()); break;
    case Stage::kBuildSemfield:
        fs::remove_all(L.views_dir());
        fs::remove(L.semfield());
        fs::remove_all(L.fused_dir());
        fs::remove(L.mesh());
        break;
    case Stage::kTrainAppearance:
        fs::remove_all(L.appearance_dir());
        fs::remove(L.appearance());
        break;
    case Stage::kRender: fs::remove_all(L.frames_dir()); break;
    case Stage::kEvaluate: fs::remove(L.report()); break;
    }
}

}  // namespace

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages = {Stage::kGenScene,        Stage::kWarpbackData, Stage::kTrainInpainter,
                                              Stage::kBuildSemfield,   Stage::kTrainAppearance, Stage::kRender,
                                              Stage::kEvaluate};
    return stages;
}

const char* stage_name(Stage stage) {
    switch (stage) {
    case Stage::kGenScene: return "gen-scene";
    case Stage::kWarpbackData: return "make-warpback-data";
    case Stage::kTrainInpainter: return "train-inpainter";
    case Stage::kBuildSemfield: return "build-semfield";
    case Stage::kTrainAppearance: return "train-appearance";
    case Stage::kRender: return "render";
    case Stage::kEvaluate: return "evaluate";
    }
    return "unknown";
}

bool stage_complete(const PipelineConfig& cfg, Stage stage) {
    const Layout L{cfg.out_dir};
    switch (stage) {
    case Stage::kGenScene: return has_manifest(L.scene_dir());
    case Stage::kWarpbackData: return has_manifest(L.warpback_dir());
    case Stage::kTrainInpainter: return fs::exists(L.inpainter());
    case Stage::kBuildSemfield:
        return has_manifest(L.views_dir()) && fs::exists(L.semfield()) && has_manifest(L.fused_dir()) &&
               fs::exists(L.mesh());
    case Stage::kTrainAppearance: return fs::exists(L.appearance());
    case Stage::kRender: return has_manifest(L.frames_dir());
    case Stage::kEvaluate: return fs::exists(L.report());
    }
    return false;
}

void run_stage(const PipelineConfig& cfg, Stage stage, bool resume, std::ostream* out) {
    cfg.validate();
    const Layout L{cfg.out_dir};
    const Logger log{out, stage_name(stage)};
    try {
        fs::create_directories(L.root);
        if (!resume) remove_outputs(L, stage);
        switch (stage) {
        case Stage::kGenScene: gen_scene(cfg, L, log); break;
        case Stage::kWarpbackData: warpback_data(cfg, L, log); break;
        case Stage::kTrainInpainter: train_inpainter_stage(cfg, L, log); break;
        case Stage::kBuildSemfield: build_semfield(cfg, L, resume, log); break;
        case Stage::kTrainAppearance: train_appearance_stage(cfg, L, log); break;
        case Stage::kRender: render_frames(cfg, L, log); break;
        case Stage::kEvaluate: evaluate(cfg, L, log); break;
        }
    } catch (const std::exception& e) {
        std::string what = e.what();
        const std::string prefix = std::string(to_string(ErrorKind::kStageFailure)) + ": ";
        if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
        fail(ErrorKind::kStageFailure, std::string("stage ") + stage_name(stage) + ": " + what);
    }
}

EvalReport run_pipeline(const PipelineConfig& cfg, std::ostream* out) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    save_config(cfg.out_dir / "config.txt", cfg);
    for (Stage s : all_stages()) {
        if (stage_complete(cfg, s)) {
            if (out) *out << "[" << stage_name(s) << "] complete, skipped" << std::endl;
            continue;
        }
        run_stage(cfg, s, true, out);
    }
    return EvalReport::load(Layout{cfg.out_dir}.report());
}

}  // namespace semscene::pipeline
