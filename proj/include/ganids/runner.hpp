#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ganids/data.hpp"
#include "ganids/ids.hpp"
#include "ganids/metrics.hpp"
#include "ganids/trainer.hpp"

namespace ganids {

inline constexpr const char* kVersion = "0.1.0";

// Flat key=value configuration with [section] headers. Unknown sections or
// keys are rejected; parsing normalizes to a canonical sorted form whose
// FNV-1a hash identifies the run.
struct ExperimentConfig {
    // [data]
    std::string train_path;
    std::string test_path;
    std::size_t scale = 100;  // divides the published per-class sample counts

    // [gan]
    std::vector<Variant> variants = {Variant::Plain, Variant::Sa, Variant::Js, Variant::SaJs};
    TrainConfig gan;                    // epochs, batch, n_critic, rates, lambdas, schedule
    std::string arch_preset = "paper";  // "paper" or "toy"
    std::size_t arch_hidden = 64;       // toy preset width
    std::size_t arch_d_k = 16;
    double arch_dropout = 0.0;
    std::uint64_t seed_base = 1000;     // per-class GAN seed = seed_base + class index

    // [mix] per-class synthetic counts at scale 1 (divided by `scale`)
    TaskMode task = TaskMode::Binary;
    std::optional<ClassLabel> held_out;  // loao
    std::map<ClassLabel, std::size_t> synth_counts = {
        {ClassLabel::Normal, 50000}, {ClassLabel::Dos, 20000}, {ClassLabel::Probe, 20000},
        {ClassLabel::R2l, 20000},    {ClassLabel::U2r, 10000},
    };

    // [ids]
    std::vector<IdsKind> ids_models = {IdsKind::Svm, IdsKind::Dt, IdsKind::Dnn};
    std::size_t ids_seed_count = 50;  // seeds 42..91 truncated to this count
    DnnConfig dnn;
    SvmConfig svm;
    TreeConfig tree;

    // [run]
    std::string out_dir = "out";
    std::size_t workers = 1;
    bool export_predictions = true;  // first seed per (arm, model)

    void validate() const;
    std::string normalized() const;   // canonical key=value dump
    std::uint64_t config_hash() const;

    // Scaled per-class plan for the configured task; loao keeps only seen
    // minority classes.
    MixPlan mix_plan() const;
    // Classes whose generators must be trained (those with plan counts > 0).
    std::vector<ClassLabel> gan_classes() const;
    GanArch arch_for(Variant v) const;
    std::vector<std::uint64_t> ids_seeds() const;  // 42, 43, ...
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
// Applies "section.key=value" overrides on top of a parsed config.
void apply_override(ExperimentConfig& cfg, const std::string& spec);

struct ArtifactRecord {
    std::string path;       // relative to the output dir
    std::uint64_t checksum;
};

struct StageRecord {
    std::string name;
    std::vector<std::string> inputs;  // relative artifact paths read
    std::vector<ArtifactRecord> artifacts;
    double seconds = 0.0;
    bool skipped = false;  // satisfied by a previous run
};

struct RunManifest {
    std::uint64_t config_hash = 0;
    std::string version;
    std::vector<StageRecord> stages;

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
    void save(const std::string& path) const;  // atomic: tmp + rename
    static RunManifest load(const std::string& path);
};

// Stage names in execution order.
extern const std::vector<std::string> kStageOrder;

// Runs preprocess -> train-gan -> synthesize -> mix -> train-ids ->
// evaluate -> report, stopping after `last_stage`. With resume=true, stages
// whose completion marker matches the config hash and whose artifacts still
// match their checksums are skipped; a marker with a different hash is a
// hard error.
RunManifest run_pipeline(const ExperimentConfig& cfg, bool resume = false,
                         const std::string& last_stage = "report");

// LOAO protocol driver: requires task=loao and a held-out class, trains a
// no-synthetic baseline arm next to every variant arm, and hard-stops if a
// held-out-class row appears in any training artifact.
RunManifest run_loao(const ExperimentConfig& cfg, bool resume = false);

// Re-derives the report stage outputs from an existing run directory.
void emit_report(const ExperimentConfig& cfg, const RunManifest& manifest);

// Counts held-out-class rows across every training artifact (GAN slices,
// synthetic tables, mixed training sets) under the run directory.
std::size_t scan_training_artifacts_for_label(const std::string& out_dir, ClassLabel label);

// Verifies that every stage input was produced by an earlier stage or is a
// declared dataset path.
void check_manifest_closure(const ExperimentConfig& cfg, const RunManifest& manifest);

std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a_bytes(const void* data, std::size_t size);

// One row of evaluate/metrics.csv.
struct MetricsRow {
    std::string arm;  // variant name or "baseline"
    std::string model;
    std::string task;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double auroc = 0.0;       // loao only
    double tpr_at_5fpr = 0.0; // loao only
    // per-class recall/precision/f1 keyed by class name; absent classes omitted
    std::map<std::string, std::array<double, 3>> per_class;
};

std::vector<MetricsRow> load_metrics_csv(const std::string& path);

}  // namespace ganids
