// Batch experiment driver: preprocess network-traffic CSVs, train the GAN
// variants, synthesize per-class samples, mix training sets, train and
// evaluate the IDS models, and emit report files.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ganids/runner.hpp"

using namespace ganids;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    bool resume = false;
};

ExperimentConfig load_config(const CommonOpts& opts) {
    ExperimentConfig cfg =
        opts.config_path.empty() ? ExperimentConfig{} : parse_config_file(opts.config_path);
    for (const auto& ov : opts.overrides) apply_override(cfg, ov);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "configuration file (key=value sections)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--stage-override", opts.overrides,
                    "override a config key, section.key=value (repeatable)");
    cmd->add_flag("--resume", opts.resume, "skip stages already completed for this config");
}

int fail(const std::string& stage, const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    err["stage"] = stage;
    std::cerr << err.dump() << std::endl;
    return 1;
}

// Runs the pipeline through `last_stage`. Earlier completed stages are
// reused; `resume` additionally allows the final stage itself to be skipped
// when its artifacts are intact.
int run_until(const CommonOpts& opts, const std::string& last_stage, bool resume) {
    try {
        ExperimentConfig cfg = load_config(opts);
        RunManifest manifest = run_pipeline(cfg, resume, last_stage);
        for (const auto& s : manifest.stages) {
            std::printf("%-10s %s (%.2fs, %zu artifacts)\n", s.name.c_str(),
                        s.skipped ? "skipped" : "done", s.seconds, s.artifacts.size());
        }
        return 0;
    } catch (const std::exception& e) {
        return fail(last_stage, e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WGAN-GP traffic synthesis and IDS evaluation pipeline"};
    app.require_subcommand(1);

    std::map<std::string, CommonOpts> opts;
    // single-stage commands execute the pipeline up to that stage
    const std::vector<std::pair<std::string, std::string>> stage_cmds = {
        {"preprocess", "fit the schema and encode the datasets"},
        {"train-gan", "train the per-class generative models"},
        {"synthesize", "sample synthetic rows from trained generators"},
        {"mix", "build the mixed training sets"},
        {"train-ids", "train the IDS classifiers"},
        {"evaluate", "score the IDS classifiers on the test set"},
        {"report", "emit roll-up tables and plot data"},
    };
    for (const auto& [name, desc] : stage_cmds) {
        add_common(app.add_subcommand(name, desc), opts[name]);
    }
    add_common(app.add_subcommand("all", "run the full pipeline"), opts["all"]);
    add_common(app.add_subcommand("loao", "run the leave-one-attack-type-out protocol"),
               opts["loao"]);

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    if (cmd == "loao") {
        try {
            ExperimentConfig cfg = load_config(opts[cmd]);
            cfg.task = TaskMode::Loao;
            if (!cfg.held_out.has_value()) cfg.held_out = ClassLabel::R2l;
            RunManifest manifest = run_loao(cfg, opts[cmd].resume);
            for (const auto& s : manifest.stages) {
                std::printf("%-10s %s (%.2fs, %zu artifacts)\n", s.name.c_str(),
                            s.skipped ? "skipped" : "done", s.seconds, s.artifacts.size());
            }
            return 0;
        } catch (const std::exception& e) {
            return fail("loao", e);
        }
    }
    if (cmd == "all") return run_until(opts[cmd], "report", opts[cmd].resume);
    // single-stage commands always reuse completed earlier stages
    return run_until(opts[cmd], cmd, /*resume=*/true);
}
