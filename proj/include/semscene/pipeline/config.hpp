// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semscene/adapters/adapters.hpp"
#include "semscene/appearance/appearance.hpp"
#include "semscene/inpaint/inpainter.hpp"
#include "semscene/pipeline/corpus.hpp"
#include "semscene/semfield/fusion.hpp"

namespace semscene::pipeline {

// Every field has a default; the key names are listed by config_keys().
struct PipelineConfig {
    std::uint64_t seed = 0;

    std::uint64_t scene_seed = 7;
    int num_classes = 4;
    int resolution = 64;
    double fov_deg = 60.0;
    Eigen::Vector3d eye{0.0, -1.2, 1.1};
    Eigen::Vector3d target{0.0, 0.3, 0.0};
    double pose_box = 0.5;
    int views = 8;
    int holdout_views = 3;

    CorpusConfig corpus;
    inpaint::InpaintConfig inpaint;
    semfield::FusionConfig fusion;
    int mesh_resolution = 64;
    appearance::TrainConfig appearance;
    std::uint64_t style_seed = 0;

    adapters::AdapterSpec synthesizer;
    adapters::AdapterSpec depth;
    double depth_noise = 0.05;
    double texture_amplitude = 0.1;

    int frames = 8;
    std::filesystem::path out_dir = "out";

    PipelineConfig();

    // Pushes shared fields (classes, resolution, seeds) into the module configs.
    void sync();
    void validate() const;
};

// Assigns one dotted key; unknown keys and malformed values raise kValidation.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

// Parses "key = value" lines; '#' starts a comment.
void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& origin = "config");
PipelineConfig load_config(const std::filesystem::path& path);
std::string format_config(const PipelineConfig& cfg);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace semscene::pipeline
