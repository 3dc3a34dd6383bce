// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "semscene/common/error.hpp"
#include "semscene/common/runtime.hpp"
#include "semscene/pipeline/config.hpp"
#include "semscene/pipeline/stages.hpp"

namespace {

using namespace semscene;
using namespace semscene::pipeline;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> sets;
    bool resume = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool resumable) {
    cmd->add_option("--config", o.config, "Config file (key = value lines)");
    cmd->add_option("--seed", o.seed, "Run seed");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--set", o.sets, "Override one key, e.g. --set semfield.iterations=500");
    if (resumable) cmd->add_flag("--resume", o.resume, "Skip sub-steps whose outputs exist");
}

PipelineConfig resolve(const CommonOptions& o) {
    PipelineConfig cfg = o.config.empty() ? PipelineConfig() : load_config(o.config);
    if (o.seed) set_config_value(cfg, "run.seed", std::to_string(*o.seed));
    if (!o.out.empty()) cfg.out_dir = o.out;
    for (const std::string& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail(ErrorKind::kValidation, "--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    semscene::tune_allocator();
    CLI::App app{"Single-mask 3D scene synthesis pipeline"};
    app.require_subcommand(0, 1);

    struct Command {
        const char* name;
        std::optional<Stage> stage;
        const char* help;
    };
    const std::vector<Command> commands = {
        {"gen-scene", Stage::kGenScene, "Render the source mask, estimate its depth, sample cameras"},
        {"make-warpback-data", Stage::kWarpbackData, "Build the warp-back inpainting corpus"},
        {"train-inpainter", Stage::kTrainInpainter, "Train the semantic inpainter"},
        {"build-semfield", Stage::kBuildSemfield, "Warp, inpaint, fuse the semantic field, extract its mesh"},
        {"train-appearance", Stage::kTrainAppearance, "Train the tri-plane appearance field"},
        {"render", Stage::kRender, "Render frames and the index manifest"},
        {"evaluate", Stage::kEvaluate, "Write the evaluation report"},
        {"pipeline", std::nullopt, "Run every incomplete stage in order"},
    };
    std::vector<CommonOptions> options(commands.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        CLI::App* sub = app.add_subcommand(commands[i].name, commands[i].help);
        add_common(sub, options[i], commands[i].stage.has_value());
        subs.push_back(sub);
    }
    bool print_keys = false;
    app.add_flag("--list-keys", print_keys, "Print every config key with its default");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }
    if (app.get_subcommands().empty()) {
        if (print_keys) {
            std::cout << format_config(PipelineConfig());
            return kExitOk;
        }
        std::cerr << app.help();
        return kExitValidation;
    }

    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        PipelineConfig cfg;
        try {
            cfg = resolve(options[i]);
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitValidation;
        }
        try {
            if (commands[i].stage) {
                run_stage(cfg, *commands[i].stage, options[i].resume, &std::cerr);
            } else {
                const EvalReport report = run_pipeline(cfg, &std::cerr);
                std::cout << report.to_text();
            }
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return e.kind() == ErrorKind::kValidation ? kExitValidation : kExitStage;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitStage;
        }
        return kExitOk;
    }
    return kExitOk;
}
