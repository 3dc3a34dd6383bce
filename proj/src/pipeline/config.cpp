// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "semscene/common/error.hpp"
#include "semscene/common/hash.hpp"

namespace semscene::pipeline {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    fail(ErrorKind::kValidation, "key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <typename T>
void parse_number(const std::string& key, const std::string& s, T& out, const char* expected) {
    T v{};
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) bad_value(key, s, expected);
    out = v;
}

void parse_value(const std::string& key, const std::string& s, int& out) { parse_number(key, s, out, "integer"); }
void parse_value(const std::string& key, const std::string& s, std::uint64_t& out) {
    parse_number(key, s, out, "unsigned integer");
}
void parse_value(const std::string& key, const std::string& s, double& out) { parse_number(key, s, out, "number"); }
void parse_value(const std::string&, const std::string& s, std::string& out) { out = s; }
void parse_value(const std::string&, const std::string& s, std::filesystem::path& out) { out = s; }
void parse_value(const std::string& key, const std::string& s, Eigen::Vector3d& out) {
    Eigen::Vector3d v;
    std::size_t start = 0;
    for (int a = 0; a < 3; ++a) {
        const std::size_t comma = s.find(',', start);
        if ((a < 2) != (comma != std::string::npos)) bad_value(key, s, "x,y,z");
        parse_number(key, s.substr(start, comma == std::string::npos ? std::string::npos : comma - start), v[a],
                     "x,y,z");
        start = comma + 1;
    }
    out = v;
}

std::string format_value(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(const std::string& v) { return v; }
std::string format_value(const std::filesystem::path& v) { return v.string(); }
std::string format_value(const Eigen::Vector3d& v) {
    return format_value(v.x()) + "," + format_value(v.y()) + "," + format_value(v.z());
}

struct Entry {
    std::string key;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename F>
Entry entry(std::string key, F field) {
    Entry e{key, nullptr, nullptr};
    e.get = [field](const PipelineConfig& c) { return format_value(field(c)); };
    e.set = [field, key](PipelineConfig& c, const std::string& v) { parse_value(key, v, field(c)); };
    return e;
}

#define SEMSCENE_KEY(name, member) entry(name, [](auto& c) -> auto& { return c.member; })

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = {
        SEMSCENE_KEY("run.seed", seed),
        SEMSCENE_KEY("run.out", out_dir),

        SEMSCENE_KEY("scene.seed", scene_seed),
        SEMSCENE_KEY("scene.num_classes", num_classes),
        SEMSCENE_KEY("scene.resolution", resolution),
        SEMSCENE_KEY("scene.fov", fov_deg),
        SEMSCENE_KEY("cameras.eye", eye),
        SEMSCENE_KEY("cameras.target", target),
        SEMSCENE_KEY("cameras.box", pose_box),
        SEMSCENE_KEY("cameras.views", views),
        SEMSCENE_KEY("cameras.holdout", holdout_views),

        SEMSCENE_KEY("warpback.pairs", corpus.count),
        SEMSCENE_KEY("warpback.scenes", corpus.scenes),

        SEMSCENE_KEY("inpaint.resolution", inpaint.resolution),
        SEMSCENE_KEY("inpaint.batch", inpaint.batch_size),
        SEMSCENE_KEY("inpaint.iterations", inpaint.iterations),
        SEMSCENE_KEY("inpaint.lr", inpaint.learning_rate),
        SEMSCENE_KEY("inpaint.width0", inpaint.widths[0]),
        SEMSCENE_KEY("inpaint.width1", inpaint.widths[1]),
        SEMSCENE_KEY("inpaint.width2", inpaint.widths[2]),
        SEMSCENE_KEY("inpaint.log_every", inpaint.log_every),

        SEMSCENE_KEY("semfield.iterations", fusion.iterations),
        SEMSCENE_KEY("semfield.rays", fusion.rays_per_iteration),
        SEMSCENE_KEY("semfield.lr", fusion.learning_rate),
        SEMSCENE_KEY("semfield.final_lr_fraction", fusion.final_lr_fraction),
        SEMSCENE_KEY("semfield.init_iterations", fusion.init_iterations),
        SEMSCENE_KEY("semfield.init_height", fusion.init_height),
        SEMSCENE_KEY("semfield.eikonal_points", fusion.eikonal_points),
        SEMSCENE_KEY("semfield.rank_pairs", fusion.rank_pairs),
        SEMSCENE_KEY("semfield.stratified", fusion.sampling.stratified),
        SEMSCENE_KEY("semfield.importance", fusion.sampling.importance),
        SEMSCENE_KEY("semfield.chunk", fusion.sampling.chunk),
        SEMSCENE_KEY("semfield.feature_dim", fusion.field.feature_dim),
        SEMSCENE_KEY("semfield.sdf_width", fusion.field.sdf_width),
        SEMSCENE_KEY("semfield.sdf_layers", fusion.field.sdf_layers),
        SEMSCENE_KEY("semfield.sem_width", fusion.field.sem_width),
        SEMSCENE_KEY("semfield.sem_layers", fusion.field.sem_layers),
        SEMSCENE_KEY("semfield.pe_bands", fusion.field.encoding.bands),
        SEMSCENE_KEY("semfield.softplus_beta", fusion.field.softplus_beta),
        SEMSCENE_KEY("semfield.init_beta", fusion.field.init_beta),
        SEMSCENE_KEY("semfield.min_beta", fusion.field.min_beta),
        SEMSCENE_KEY("semfield.w_depth", fusion.weights.depth),
        SEMSCENE_KEY("semfield.w_trans", fusion.weights.trans),
        SEMSCENE_KEY("semfield.w_sem", fusion.weights.sem),
        SEMSCENE_KEY("semfield.w_eik", fusion.weights.eik),
        SEMSCENE_KEY("semfield.w_rank", fusion.weights.rank),
        SEMSCENE_KEY("semfield.w_src", fusion.weights.src),
        SEMSCENE_KEY("semfield.tau_fraction", fusion.weights.tau_fraction),
        SEMSCENE_KEY("semfield.eps", fusion.weights.eps),
        SEMSCENE_KEY("semfield.log_every", fusion.log_every),
        SEMSCENE_KEY("semfield.mesh_resolution", mesh_resolution),

        SEMSCENE_KEY("appearance.iterations", appearance.iterations),
        SEMSCENE_KEY("appearance.lr", appearance.learning_rate),
        SEMSCENE_KEY("appearance.disc_lr", appearance.disc_learning_rate),
        SEMSCENE_KEY("appearance.w_adv", appearance.w_adv),
        SEMSCENE_KEY("appearance.w_l2", appearance.w_l2),
        SEMSCENE_KEY("appearance.w_perc", appearance.w_perc),
        SEMSCENE_KEY("appearance.disc_width", appearance.disc_width),
        SEMSCENE_KEY("appearance.plane_resolution", appearance.field.plane_resolution),
        SEMSCENE_KEY("appearance.plane_channels", appearance.field.plane_channels),
        SEMSCENE_KEY("appearance.hidden", appearance.field.hidden),
        SEMSCENE_KEY("appearance.sky_resolution", appearance.field.sky_resolution),
        SEMSCENE_KEY("appearance.log_every", appearance.log_every),
        SEMSCENE_KEY("appearance.style_seed", style_seed),

        SEMSCENE_KEY("adapters.synthesizer", synthesizer.name),
        SEMSCENE_KEY("adapters.synthesizer_command", synthesizer.command),
        SEMSCENE_KEY("adapters.depth", depth.name),
        SEMSCENE_KEY("adapters.depth_command", depth.command),
        SEMSCENE_KEY("adapters.depth_noise", depth_noise),
        SEMSCENE_KEY("adapters.texture_amplitude", texture_amplitude),

        SEMSCENE_KEY("render.frames", frames),
    };
    return entries;
}

#undef SEMSCENE_KEY

const Entry& find_entry(const std::string& key) {
    for (const Entry& e : registry())
        if (e.key == key) return e;
    fail(ErrorKind::kValidation, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

PipelineConfig::PipelineConfig() {
    fusion.sampling = {64, 32, true, 0, 256};
    fusion.weights.eik = 3.0;
    fusion.eikonal_points = 2048;
    fusion.field.init_beta = 0.05;
    sync();
}

void PipelineConfig::sync() {
    corpus.num_classes = num_classes;
    corpus.resolution = inpaint.resolution;
    corpus.pose_box = pose_box;
    corpus.fov_deg = fov_deg;
    corpus.seed = mix_seed(seed, 1);
    inpaint.seed = mix_seed(seed, 2);
    fusion.field.num_classes = num_classes;
    fusion.seed = mix_seed(seed, 3);
    fusion.sampling.seed = mix_seed(seed, 4);
    appearance.seed = mix_seed(seed, 5);
    appearance.field.seed = mix_seed(seed, 6);
    appearance.field.bounds = fusion.field.bounds;
}

void PipelineConfig::validate() const {
    try {
        require(num_classes >= 2, "scene.num_classes must be at least 2");
        require(resolution >= 8, "scene.resolution must be at least 8");
        require(fov_deg > 0.0 && fov_deg < 180.0, "scene.fov must lie in (0, 180)");
        require(pose_box >= 0.0, "cameras.box must be non-negative");
        require(views >= 1 && holdout_views >= 1, "cameras.views and cameras.holdout must be positive");
        require((eye - target).norm() > 1e-9, "cameras.eye and cameras.target coincide");
        require(corpus.count > 0 && corpus.scenes > 0, "warpback sizes must be positive");
        require(mesh_resolution >= 4, "semfield.mesh_resolution must be at least 4");
        require(frames >= 1, "render.frames must be positive");
        require(depth_noise >= 0.0 && texture_amplitude >= 0.0, "adapter noise levels must be non-negative");
        require(!out_dir.empty(), "run.out must be set");
        for (const adapters::AdapterSpec* spec : {&synthesizer, &depth}) {
            require(spec->name == "stub" || spec->name == "external", "unknown adapter '" + spec->name + "'");
            require(spec->name != "external" || !spec->command.empty(), "external adapters need a command");
        }
        inpaint.validate();
        fusion.validate();
        appearance.validate();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::kValidation) throw;
        fail(ErrorKind::kValidation, e.what());
    }
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    find_entry(key).set(cfg, value);
    cfg.sync();
}

std::string get_config_value(const PipelineConfig& cfg, const std::string& key) { return find_entry(key).get(cfg); }

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const Entry& e : registry()) keys.push_back(e.key);
    return keys;
}

void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::kValidation, origin + ":" + std::to_string(lineno) + ": expected key = value");
        set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kValidation, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    PipelineConfig cfg;
    apply_config_text(cfg, ss.str(), path.string());
    return cfg;
}

std::string format_config(const PipelineConfig& cfg) {
    std::string out;
    for (const Entry& e : registry()) out += e.key + " = " + e.get(cfg) + "\n";
    return out;
}

void save_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
    std::ofstream out(path);
    out << format_config(cfg);
    if (!out) fail(ErrorKind::kStageFailure, "cannot write " + path.string());
}

}  // namespace semscene::pipeline
