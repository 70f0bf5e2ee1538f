#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ganids/runner.hpp"

using namespace ganids;
namespace fs = std::filesystem;

namespace {

// Five separable-ish blobs over three numerics plus one nominal column.
void write_toy_nids_csv(const std::string& path, std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::ofstream f(path, std::ios::trunc);
    const char* cats[3] = {"tcp", "udp", "icmp"};
    struct Blob {
        const char* label;
        double cx, cy, cz;
        double frac;  // relative class size
    };
    const Blob blobs[] = {
        {"normal", 0, 0, 0, 1.0}, {"dos", 2, 0, 0, 0.7},    {"probe", 0, 2, 0, 0.5},
        {"u2r", 0, 0, 2, 0.25},   {"r2l", 2, 2, 0, 0.4},
    };
    for (const auto& b : blobs) {
        const auto n = static_cast<std::size_t>(static_cast<double>(per_class) * b.frac);
        for (std::size_t i = 0; i < n; ++i) {
            f << b.cx + 0.3 * rng.normal() << "," << b.cy + 0.3 * rng.normal() << ","
              << b.cz + 0.3 * rng.normal() << "," << cats[rng.uniform_index(3)] << "," << b.label
              << "\n";
        }
    }
}

ExperimentConfig smoke_config(const std::string& dir, TaskMode task) {
    ExperimentConfig cfg;
    cfg.train_path = dir + "/train.csv";
    cfg.test_path = dir + "/test.csv";
    cfg.scale = 2000;  // normal 25, dos 10, probe 10, r2l 10, u2r 5
    cfg.variants = {Variant::Plain, Variant::SaJs};
    cfg.gan.epochs = 5;
    cfg.gan.batch_size = 32;
    cfg.gan.n_critic = 2;
    cfg.gan.latent_dim = 4;
    cfg.arch_preset = "toy";
    cfg.arch_hidden = 12;
    cfg.task = task;
    if (task == TaskMode::Loao) cfg.held_out = ClassLabel::R2l;
    cfg.ids_seed_count = 2;
    cfg.dnn.epochs = 5;
    cfg.svm.iterations = 100;
    cfg.out_dir = dir + "/out";
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config text parses, rejects unknown keys, and hashes canonically") {
    const std::string text =
        "[gan]\n"
        "epochs = 7\n"
        "variants = plain, js\n"
        "# comment\n"
        "[data]\n"
        "scale = 10\n"
        "train = a.csv\n"
        "test = b.csv\n";
    ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.gan.epochs == 7);
    CHECK(cfg.variants == std::vector<Variant>{Variant::Plain, Variant::Js});
    CHECK(cfg.scale == 10);

    // permuted key order hashes identically
    const std::string permuted =
        "[data]\n"
        "test = b.csv\n"
        "train = a.csv\n"
        "scale = 10\n"
        "[gan]\n"
        "variants = plain,js\n"
        "epochs = 7\n";
    CHECK(parse_config_text(permuted).config_hash() == cfg.config_hash());

    // normalized form round-trips to the same normalized form
    ExperimentConfig again = parse_config_text(
        "[data]\ntrain = a.csv\ntest = b.csv\nscale = 10\n[gan]\nepochs = 7\nvariants = "
        "plain,js\n");
    CHECK(again.normalized() == cfg.normalized());

    CHECK_THROWS_AS(parse_config_text("[gan]\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[nosuch]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("x = 1\n"), ConfigError);

    apply_override(cfg, "gan.epochs=9");
    CHECK(cfg.gan.epochs == 9);
    CHECK_THROWS_AS(apply_override(cfg, "nonsense"), ConfigError);
}

TEST_CASE("mix plans follow the task rules") {
    ExperimentConfig cfg;
    cfg.scale = 1000;  // normal 50, dos 20, probe 20, r2l 20, u2r 10

    cfg.task = TaskMode::Binary;
    MixPlan binary = cfg.mix_plan();
    CHECK(binary.synthetic_counts.size() == 5);
    CHECK(binary.synthetic_counts[ClassLabel::Normal] == 50);

    cfg.task = TaskMode::Multi;
    MixPlan multi = cfg.mix_plan();
    CHECK(multi.synthetic_counts.size() == 3);
    CHECK(multi.synthetic_counts.count(ClassLabel::Normal) == 0);
    CHECK(multi.synthetic_counts[ClassLabel::Probe] == 20);

    cfg.task = TaskMode::Loao;
    cfg.held_out = ClassLabel::R2l;
    MixPlan loao = cfg.mix_plan();
    CHECK(loao.synthetic_counts.size() == 2);
    CHECK(loao.synthetic_counts[ClassLabel::Probe] == 20);
    CHECK(loao.synthetic_counts[ClassLabel::U2r] == 10);
    CHECK(loao.synthetic_counts.count(ClassLabel::R2l) == 0);
}

TEST_CASE("smoke pipeline runs end to end with verifiable roll-up") {
    TempDir tmp("ganids_runner_smoke");
    write_toy_nids_csv((tmp.path / "train.csv").string(), 120, 1);
    write_toy_nids_csv((tmp.path / "test.csv").string(), 60, 2);
    ExperimentConfig cfg = smoke_config(tmp.path.string(), TaskMode::Binary);

    RunManifest manifest = run_pipeline(cfg);
    CHECK(manifest.stages.size() == 7);
    for (const auto& s : manifest.stages) CHECK_FALSE(s.skipped);
    CHECK(fs::exists(tmp.path / "out/manifest.json"));
    check_manifest_closure(cfg, manifest);

    auto rows = load_metrics_csv((tmp.path / "out/evaluate/metrics.csv").string());
    // 2 arms x (svm 1 + dt 1 + dnn 2 seeds) = 8 rows
    CHECK(rows.size() == 8);
    for (const auto& r : rows) {
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
        CHECK(r.task == "binary");
    }

    // independent recomputation of the roll-up means and stds
    const std::string rollup = slurp((tmp.path / "out/report/rollup.csv").string());
    std::stringstream ss(rollup);
    std::string line;
    std::getline(ss, line);  // header
    std::size_t checked = 0;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) f.push_back(field);
        REQUIRE(f.size() == 12);
        std::vector<double> accs;
        for (const auto& r : rows) {
            if (r.arm == f[0] && r.model == f[1] && r.task == f[2]) accs.push_back(r.accuracy);
        }
        REQUIRE(accs.size() == std::stoul(f[3]));
        double mean = 0;
        for (double a : accs) mean += a;
        mean /= double(accs.size());
        double var = 0;
        for (double a : accs) var += (a - mean) * (a - mean);
        const double stddev = std::sqrt(var / double(accs.size()));
        CHECK(std::abs(std::stod(f[4]) - mean) < 1e-12);
        CHECK(std::abs(std::stod(f[5]) - stddev) < 1e-12);
        ++checked;
    }
    CHECK(checked == 6);  // 2 arms x 3 models

    // loss curve file has exactly E rows per (variant, class)
    const std::string curves = slurp((tmp.path / "out/report/loss_curves.csv").string());
    std::size_t data_lines = 0;
    for (char c : curves) data_lines += c == '\n';
    CHECK(data_lines - 1 == cfg.variants.size() * cfg.gan_classes().size() * cfg.gan.epochs);
}

TEST_CASE("identical configs give byte-identical metric csvs") {
    TempDir tmp("ganids_runner_det");
    write_toy_nids_csv((tmp.path / "train.csv").string(), 80, 3);
    write_toy_nids_csv((tmp.path / "test.csv").string(), 40, 4);

    ExperimentConfig cfg1 = smoke_config(tmp.path.string(), TaskMode::Binary);
    cfg1.variants = {Variant::Js};
    cfg1.out_dir = (tmp.path / "out1").string();
    ExperimentConfig cfg2 = cfg1;
    cfg2.out_dir = (tmp.path / "out2").string();

    run_pipeline(cfg1);
    run_pipeline(cfg2);
    CHECK(slurp(cfg1.out_dir + "/evaluate/metrics.csv") ==
          slurp(cfg2.out_dir + "/evaluate/metrics.csv"));
    CHECK(slurp(cfg1.out_dir + "/report/rollup.csv") == slurp(cfg2.out_dir + "/report/rollup.csv"));
    CHECK(slurp(cfg1.out_dir + "/evaluate/alignment.csv") ==
          slurp(cfg2.out_dir + "/evaluate/alignment.csv"));
}

TEST_CASE("resume skips intact stages and re-runs from deleted artifacts") {
    TempDir tmp("ganids_runner_resume");
    write_toy_nids_csv((tmp.path / "train.csv").string(), 80, 5);
    write_toy_nids_csv((tmp.path / "test.csv").string(), 40, 6);
    ExperimentConfig cfg = smoke_config(tmp.path.string(), TaskMode::Binary);
    cfg.variants = {Variant::Plain};

    run_pipeline(cfg);

    // untouched resume skips everything
    RunManifest again = run_pipeline(cfg, /*resume=*/true);
    for (const auto& s : again.stages) CHECK(s.skipped);

    // deleting the ids models re-runs train-ids and everything after it
    for (const auto& entry : fs::directory_iterator(tmp.path / "out/train-ids")) {
        fs::remove(entry.path());
    }
    RunManifest resumed = run_pipeline(cfg, /*resume=*/true);
    std::map<std::string, bool> skipped;
    for (const auto& s : resumed.stages) skipped[s.name] = s.skipped;
    CHECK(skipped["preprocess"]);
    CHECK(skipped["train-gan"]);
    CHECK(skipped["synthesize"]);
    CHECK(skipped["mix"]);
    CHECK_FALSE(skipped["train-ids"]);
    CHECK_FALSE(skipped["evaluate"]);
    CHECK_FALSE(skipped["report"]);

    // a different config resuming into the same directory is a hard error
    ExperimentConfig other = cfg;
    other.gan.epochs += 1;
    CHECK_THROWS_AS(run_pipeline(other, /*resume=*/true), ConfigError);
}

TEST_CASE("loao run keeps the held-out class out of every training artifact") {
    TempDir tmp("ganids_runner_loao");
    write_toy_nids_csv((tmp.path / "train.csv").string(), 100, 7);
    write_toy_nids_csv((tmp.path / "test.csv").string(), 60, 8);
    ExperimentConfig cfg = smoke_config(tmp.path.string(), TaskMode::Loao);
    cfg.variants = {Variant::Plain, Variant::SaJs};

    RunManifest manifest = run_loao(cfg);
    CHECK(manifest.stages.size() == 7);
    CHECK(scan_training_artifacts_for_label(cfg.out_dir, ClassLabel::R2l) == 0);

    auto rows = load_metrics_csv(cfg.out_dir + "/evaluate/metrics.csv");
    // 3 arms (baseline + 2 variants) x (svm + dt + dnn x 2 seeds)
    CHECK(rows.size() == 12);
    bool saw_baseline = false;
    for (const auto& r : rows) {
        saw_baseline = saw_baseline || r.arm == "baseline";
        CHECK(r.task == "loao");
        CHECK(r.auroc >= 0.0);
        CHECK(r.auroc <= 1.0);
        CHECK(r.per_class.count("r2l") == 0);  // held-out never among seen classes
    }
    CHECK(saw_baseline);

    // roc point lists exist with proper endpoints
    const std::string roc = slurp(cfg.out_dir + "/report/roc_baseline_dnn_42.csv");
    CHECK(roc.rfind("fpr,tpr\n0,0\n", 0) == 0);
    CHECK(roc.find("\n1,1\n") != std::string::npos);
}

TEST_CASE("cli runs a stage chain and reports machine-readable errors") {
    TempDir tmp("ganids_runner_cli");
    write_toy_nids_csv((tmp.path / "train.csv").string(), 60, 9);
    write_toy_nids_csv((tmp.path / "test.csv").string(), 30, 10);
    ExperimentConfig cfg = smoke_config(tmp.path.string(), TaskMode::Binary);
    cfg.variants = {Variant::Plain};

    // write a config file for the CLI
    std::ofstream f(tmp.path / "smoke.cfg");
    f << "[data]\ntrain = " << cfg.train_path << "\ntest = " << cfg.test_path
      << "\nscale = 2000\n[gan]\nvariants = plain\nepochs = 3\nbatch_size = 32\nn_critic = 2\n"
         "latent_dim = 4\narch = toy\narch_hidden = 12\n[ids]\nseed_count = 1\ndnn_epochs = 3\n"
         "svm_iterations = 50\n[run]\nout = "
      << (tmp.path / "cli_out").string() << "\n";
    f.close();

    const std::string exe = GANIDS_CLI_PATH;
    REQUIRE(fs::exists(exe));
    const std::string cmd = exe + " preprocess --config " + (tmp.path / "smoke.cfg").string();
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(tmp.path / "cli_out/preprocess/schema.json"));

    const std::string all_cmd = exe + " all --config " + (tmp.path / "smoke.cfg").string();
    CHECK(std::system(all_cmd.c_str()) == 0);
    CHECK(fs::exists(tmp.path / "cli_out/report/rollup.csv"));

    const std::string bad =
        exe + " all --config /nonexistent.cfg 2> " + (tmp.path / "err.txt").string();
    CHECK(std::system(bad.c_str()) != 0);
    const std::string err = slurp((tmp.path / "err.txt").string());
    CHECK(err.find("\"error\"") != std::string::npos);
}
