// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "semscene/pipeline/config.hpp"
#include "semscene/pipeline/metrics.hpp"

namespace semscene::pipeline {

enum class Stage {
    kGenScene,
    kWarpbackData,
    kTrainInpainter,
    kBuildSemfield,
    kTrainAppearance,
    kRender,
    kEvaluate,
};

const std::vector<Stage>& all_stages();
const char* stage_name(Stage stage);

// File layout under the output directory.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path scene_dir() const { return root / "scene"; }
    std::filesystem::path warpback_dir() const { return root / "warpback"; }
    std::filesystem::path views_dir() const { return root / "views"; }
    std::filesystem::path fused_dir() const { return root / "fused"; }
    std::filesystem::path appearance_dir() const { return root / "appearance"; }
    std::filesystem::path frames_dir() const { return root / "frames"; }

    std::filesystem::path cameras() const { return scene_dir() / "cameras.txt"; }
    std::filesystem::path holdout_cameras() const { return scene_dir() / "holdout.txt"; }
    std::filesystem::path inpainter() const { return root / "inpainter.ckpt"; }
    std::filesystem::path semfield() const { return root / "semfield.ckpt"; }
    std::filesystem::path mesh() const { return root / "mesh.bin"; }
    std::filesystem::path appearance() const { return root / "appearance.ckpt"; }
    std::filesystem::path report() const { return root / "report.txt"; }
};

// A stage is complete when all of its outputs exist.
bool stage_complete(const PipelineConfig& cfg, Stage stage);

// Runs one stage. With `resume`, sub-steps whose outputs exist are skipped;
// otherwise the stage's outputs are removed first. Failures raise kStageFailure
// naming the stage; outputs already written are kept.
void run_stage(const PipelineConfig& cfg, Stage stage, bool resume = false, std::ostream* log = nullptr);

// Runs every incomplete stage in order and returns the report.
EvalReport run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr);

}  // namespace semscene::pipeline
