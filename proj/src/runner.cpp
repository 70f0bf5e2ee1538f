#include "ganids/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace ganids {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kStageOrder = {
    "preprocess", "train-gan", "synthesize", "mix", "train-ids", "evaluate", "report",
};

// ---- hashing ----

std::uint64_t fnv1a_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("fnv1a_file: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f.read(buf, sizeof buf) || f.gcount() > 0) {
        const auto n = static_cast<std::size_t>(f.gcount());
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (f.eof()) break;
    }
    return h;
}

// ---- config ----

namespace {

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    try {
        return static_cast<std::size_t>(std::stoull(v));
    } catch (...) {
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    }
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

void set_key(ExperimentConfig& cfg, const std::string& section, const std::string& key,
             const std::string& value) {
    const std::string full = section + "." + key;
    if (section == "data") {
        if (key == "train") cfg.train_path = value;
        else if (key == "test") cfg.test_path = value;
        else if (key == "scale") cfg.scale = parse_size(value, full);
        else throw ConfigError("config: unknown key " + full);
    } else if (section == "gan") {
        if (key == "variants") {
            cfg.variants.clear();
            for (const auto& v : split_list(value)) cfg.variants.push_back(variant_from(v));
        } else if (key == "epochs") cfg.gan.epochs = parse_size(value, full);
        else if (key == "batch_size") cfg.gan.batch_size = parse_size(value, full);
        else if (key == "n_critic") cfg.gan.n_critic = parse_size(value, full);
        else if (key == "lr") cfg.gan.lr_g = cfg.gan.lr_c = cfg.gan.lr_d = parse_real(value, full);
        else if (key == "lr_g") cfg.gan.lr_g = parse_real(value, full);
        else if (key == "lr_c") cfg.gan.lr_c = parse_real(value, full);
        else if (key == "lr_d") cfg.gan.lr_d = parse_real(value, full);
        else if (key == "beta1") cfg.gan.adam_beta1 = parse_real(value, full);
        else if (key == "beta2") cfg.gan.adam_beta2 = parse_real(value, full);
        else if (key == "lambda_gp") cfg.gan.lambda_gp = parse_real(value, full);
        else if (key == "lambda_js") cfg.gan.lambda_js_init = parse_real(value, full);
        else if (key == "js_schedule") cfg.gan.js_schedule = js_schedule_from(value);
        else if (key == "js_update_period") cfg.gan.js_update_period = parse_size(value, full);
        else if (key == "latent_dim") cfg.gan.latent_dim = parse_size(value, full);
        else if (key == "grad_clip") cfg.gan.grad_clip_norm = parse_real(value, full);
        else if (key == "arch") cfg.arch_preset = value;
        else if (key == "arch_hidden") cfg.arch_hidden = parse_size(value, full);
        else if (key == "d_k") cfg.arch_d_k = parse_size(value, full);
        else if (key == "dropout") cfg.arch_dropout = parse_real(value, full);
        else if (key == "seed_base") cfg.seed_base = parse_size(value, full);
        else throw ConfigError("config: unknown key " + full);
    } else if (section == "mix") {
        if (key == "task") cfg.task = task_from(value);
        else if (key == "held_out") cfg.held_out = label_from(value);
        else if (key == "normal") cfg.synth_counts[ClassLabel::Normal] = parse_size(value, full);
        else if (key == "dos") cfg.synth_counts[ClassLabel::Dos] = parse_size(value, full);
        else if (key == "probe") cfg.synth_counts[ClassLabel::Probe] = parse_size(value, full);
        else if (key == "r2l") cfg.synth_counts[ClassLabel::R2l] = parse_size(value, full);
        else if (key == "u2r") cfg.synth_counts[ClassLabel::U2r] = parse_size(value, full);
        else throw ConfigError("config: unknown key " + full);
    } else if (section == "ids") {
        if (key == "models") {
            cfg.ids_models.clear();
            for (const auto& v : split_list(value)) cfg.ids_models.push_back(ids_kind_from(v));
        } else if (key == "seed_count") cfg.ids_seed_count = parse_size(value, full);
        else if (key == "dnn_epochs") cfg.dnn.epochs = parse_size(value, full);
        else if (key == "dnn_batch") cfg.dnn.batch_size = parse_size(value, full);
        else if (key == "dnn_lr") cfg.dnn.lr = parse_real(value, full);
        else if (key == "svm_c_reg") cfg.svm.c_reg = parse_real(value, full);
        else if (key == "svm_iterations") cfg.svm.iterations = parse_size(value, full);
        else if (key == "tree_max_depth") cfg.tree.max_depth = parse_size(value, full);
        else if (key == "tree_min_leaf") cfg.tree.min_leaf = parse_size(value, full);
        else throw ConfigError("config: unknown key " + full);
    } else if (section == "run") {
        if (key == "out") cfg.out_dir = value;
        else if (key == "workers") cfg.workers = parse_size(value, full);
        else if (key == "export_predictions") cfg.export_predictions = parse_bool(value, full);
        else throw ConfigError("config: unknown key " + full);
    } else {
        throw ConfigError("config: unknown section [" + section + "]");
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config: bad section header at line " + std::to_string(line_no));
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: expected key=value at line " + std::to_string(line_no));
        }
        if (section.empty()) {
            throw ConfigError("config: key outside any section at line " + std::to_string(line_no));
        }
        set_key(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    const auto dot = spec.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("override: expected section.key=value, got '" + spec + "'");
    }
    set_key(cfg, trim(spec.substr(0, dot)), trim(spec.substr(dot + 1, eq - dot - 1)),
            trim(spec.substr(eq + 1)));
}

void ExperimentConfig::validate() const {
    gan.validate();
    if (scale == 0) throw ConfigError("config: scale must be positive");
    if (workers == 0) throw ConfigError("config: workers must be positive");
    if (variants.empty()) throw ConfigError("config: at least one variant");
    if (ids_models.empty()) throw ConfigError("config: at least one ids model");
    if (ids_seed_count == 0) throw ConfigError("config: seed_count must be positive");
    if (arch_preset != "paper" && arch_preset != "toy") {
        throw ConfigError("config: arch must be 'paper' or 'toy'");
    }
    if (task == TaskMode::Loao && !held_out.has_value()) {
        throw ConfigError("config: loao task requires mix.held_out");
    }
}

std::string ExperimentConfig::normalized() const {
    std::ostringstream os;
    os << "data.scale=" << scale << "\n";
    os << "data.test=" << test_path << "\n";
    os << "data.train=" << train_path << "\n";
    os << "gan.arch=" << arch_preset << "\n";
    os << "gan.arch_hidden=" << arch_hidden << "\n";
    os << "gan.batch_size=" << gan.batch_size << "\n";
    os << "gan.beta1=" << fmt_g(gan.adam_beta1) << "\n";
    os << "gan.beta2=" << fmt_g(gan.adam_beta2) << "\n";
    os << "gan.d_k=" << arch_d_k << "\n";
    os << "gan.dropout=" << fmt_g(arch_dropout) << "\n";
    os << "gan.epochs=" << gan.epochs << "\n";
    os << "gan.grad_clip=" << fmt_g(gan.grad_clip_norm) << "\n";
    os << "gan.js_schedule=" << js_schedule_name(gan.js_schedule) << "\n";
    os << "gan.js_update_period=" << gan.js_update_period << "\n";
    os << "gan.lambda_gp=" << fmt_g(gan.lambda_gp) << "\n";
    os << "gan.lambda_js=" << fmt_g(gan.lambda_js_init) << "\n";
    os << "gan.latent_dim=" << gan.latent_dim << "\n";
    os << "gan.lr_c=" << fmt_g(gan.lr_c) << "\n";
    os << "gan.lr_d=" << fmt_g(gan.lr_d) << "\n";
    os << "gan.lr_g=" << fmt_g(gan.lr_g) << "\n";
    os << "gan.n_critic=" << gan.n_critic << "\n";
    os << "gan.seed_base=" << seed_base << "\n";
    os << "gan.variants=";
    for (std::size_t i = 0; i < variants.size(); ++i) {
        os << (i ? "," : "") << variant_name(variants[i]);
    }
    os << "\n";
    os << "ids.dnn_batch=" << dnn.batch_size << "\n";
    os << "ids.dnn_epochs=" << dnn.epochs << "\n";
    os << "ids.dnn_lr=" << fmt_g(dnn.lr) << "\n";
    os << "ids.models=";
    for (std::size_t i = 0; i < ids_models.size(); ++i) {
        os << (i ? "," : "") << ids_kind_name(ids_models[i]);
    }
    os << "\n";
    os << "ids.seed_count=" << ids_seed_count << "\n";
    os << "ids.svm_c_reg=" << fmt_g(svm.c_reg) << "\n";
    os << "ids.svm_iterations=" << svm.iterations << "\n";
    os << "ids.tree_max_depth=" << tree.max_depth << "\n";
    os << "ids.tree_min_leaf=" << tree.min_leaf << "\n";
    os << "mix.held_out=" << (held_out ? label_name(*held_out) : "") << "\n";
    for (const auto& [label, count] : synth_counts) {
        os << "mix." << label_name(label) << "=" << count << "\n";
    }
    os << "mix.task=" << task_name(task) << "\n";
    os << "run.export_predictions=" << (export_predictions ? "true" : "false") << "\n";
    // out_dir and workers do not change results; they stay outside the hash
    return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
    const std::string n = normalized();
    return fnv1a_bytes(n.data(), n.size());
}

MixPlan ExperimentConfig::mix_plan() const {
    MixPlan plan;
    plan.mode = task;
    plan.held_out = held_out;
    auto scaled = [&](ClassLabel c) -> std::size_t {
        auto it = synth_counts.find(c);
        return it == synth_counts.end() ? 0 : it->second / scale;
    };
    switch (task) {
        case TaskMode::Binary:
            for (auto c : kFiveClasses) {
                if (scaled(c) > 0) plan.synthetic_counts[c] = scaled(c);
            }
            break;
        case TaskMode::Multi:
            for (auto c : {ClassLabel::Probe, ClassLabel::R2l, ClassLabel::U2r}) {
                if (scaled(c) > 0) plan.synthetic_counts[c] = scaled(c);
            }
            break;
        case TaskMode::Loao:
            // only the minority classes are augmented; the held-out class is
            // excluded from both training and synthesis
            for (auto c : {ClassLabel::Probe, ClassLabel::U2r}) {
                if (held_out && c == *held_out) continue;
                if (scaled(c) > 0) plan.synthetic_counts[c] = scaled(c);
            }
            break;
    }
    plan.validate();
    return plan;
}

std::vector<ClassLabel> ExperimentConfig::gan_classes() const {
    std::vector<ClassLabel> out;
    for (const auto& [label, count] : mix_plan().synthetic_counts) {
        if (count > 0) out.push_back(label);
    }
    return out;
}

GanArch ExperimentConfig::arch_for(Variant v) const {
    GanArch a = arch_preset == "toy" ? toy_arch(v, arch_hidden) : paper_arch(v);
    a.d_k = arch_d_k;
    a.dropout = arch_dropout;
    return a;
}

std::vector<std::uint64_t> ExperimentConfig::ids_seeds() const {
    std::vector<std::uint64_t> out(ids_seed_count);
    for (std::size_t i = 0; i < ids_seed_count; ++i) out[i] = 42 + i;
    return out;
}

// ---- manifest ----

std::string RunManifest::to_json() const {
    json j;
    j["version"] = version;
    j["config_hash"] = config_hash;
    j["stages"] = json::array();
    for (const auto& s : stages) {
        json js;
        js["name"] = s.name;
        js["seconds"] = s.seconds;
        js["skipped"] = s.skipped;
        js["inputs"] = s.inputs;
        js["artifacts"] = json::array();
        for (const auto& a : s.artifacts) {
            js["artifacts"].push_back({{"path", a.path}, {"checksum", a.checksum}});
        }
        j["stages"].push_back(js);
    }
    return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
    json j = json::parse(text);
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::uint64_t>();
    for (const auto& js : j.at("stages")) {
        StageRecord s;
        s.name = js.at("name").get<std::string>();
        s.seconds = js.at("seconds").get<double>();
        s.skipped = js.at("skipped").get<bool>();
        s.inputs = js.at("inputs").get<std::vector<std::string>>();
        for (const auto& ja : js.at("artifacts")) {
            s.artifacts.push_back(
                {ja.at("path").get<std::string>(), ja.at("checksum").get<std::uint64_t>()});
        }
        m.stages.push_back(std::move(s));
    }
    return m;
}

void RunManifest::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw IoError("manifest: cannot open " + tmp);
        f << to_json() << "\n";
        if (!f) throw IoError("manifest: write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("manifest: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

// ---- stage machinery ----

namespace {

struct StageCtx {
    const ExperimentConfig& cfg;
    fs::path out;
    StageRecord* rec = nullptr;
    std::mutex mu;

    std::string abs(const std::string& rel) const { return (out / rel).string(); }

    void declare_input(const std::string& rel) {
        std::lock_guard<std::mutex> lock(mu);
        if (std::find(rec->inputs.begin(), rec->inputs.end(), rel) == rec->inputs.end()) {
            rec->inputs.push_back(rel);
        }
    }

    // register an artifact that was just written
    void emit(const std::string& rel) {
        const std::uint64_t sum = fnv1a_file(abs(rel));
        std::lock_guard<std::mutex> lock(mu);
        rec->artifacts.push_back({rel, sum});
    }
};

// Bounded worker pool over [0, n); results must be written to distinct
// slots/paths so output is deterministic regardless of worker count.
template <typename F>
void parallel_units(std::size_t n, std::size_t workers, F&& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min(workers, n);
    pool.reserve(count);
    for (std::size_t i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string class_file(const std::string& prefix, ClassLabel c, const std::string& ext) {
    return prefix + "_" + label_name(c) + ext;
}

std::vector<std::string> arms_for(const ExperimentConfig& cfg) {
    std::vector<std::string> arms;
    if (cfg.task == TaskMode::Loao) arms.push_back("baseline");
    for (auto v : cfg.variants) arms.push_back(variant_name(v));
    return arms;
}

// deterministic IDS kinds run once; seed-dependent kinds run per seed
std::vector<std::uint64_t> seeds_for_kind(const ExperimentConfig& cfg, IdsKind kind) {
    if (kind == IdsKind::Svm || kind == IdsKind::Dt) return {42};
    return cfg.ids_seeds();
}

// ---- stages ----

void stage_preprocess(StageCtx& ctx) {
    const auto& cfg = ctx.cfg;
    ctx.rec->inputs.push_back(cfg.train_path);
    ctx.rec->inputs.push_back(cfg.test_path);

    RawDataset raw_train = read_raw_csv(cfg.train_path);
    RawDataset raw_test = read_raw_csv(cfg.test_path);
    FeatureSchema schema = fit_schema(raw_train);
    schema.save(ctx.abs("preprocess/schema.json"));
    ctx.emit("preprocess/schema.json");

    EncodeStats train_stats, test_stats;
    DatasetTable train = encode(raw_train, schema, &train_stats);
    DatasetTable test = encode(raw_test, schema, &test_stats);

    if (cfg.task == TaskMode::Loao) {
        // the held-out class never reaches any training artifact
        DatasetTable filtered;
        filtered.schema = train.schema;
        filtered.width = train.width;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            if (train.labels[r] == *cfg.held_out) continue;
            filtered.features.insert(filtered.features.end(),
                                     train.features.begin() + r * train.width,
                                     train.features.begin() + (r + 1) * train.width);
            filtered.labels.push_back(train.labels[r]);
            filtered.provenance.push_back(train.provenance[r]);
        }
        train = std::move(filtered);
    }

    save_table_csv(train, ctx.abs("preprocess/train.csv"));
    ctx.emit("preprocess/train.csv");
    save_table_csv(test, ctx.abs("preprocess/test.csv"));
    ctx.emit("preprocess/test.csv");

    for (auto c : cfg.gan_classes()) {
        DatasetTable slice = filter_by_label(train, c);
        if (slice.rows() == 0) {
            throw IngestError("preprocess: no training rows for class " + label_name(c));
        }
        const std::string rel = "preprocess/" + class_file("gan_train", c, ".csv");
        save_table_csv(slice, ctx.abs(rel));
        ctx.emit(rel);
    }

    json stats;
    stats["train_clamped"] = train_stats.clamped;
    stats["train_unseen_categories"] = train_stats.unseen_categories;
    stats["test_clamped"] = test_stats.clamped;
    stats["test_unseen_categories"] = test_stats.unseen_categories;
    std::ofstream f(ctx.abs("preprocess/encode_stats.json"), std::ios::trunc);
    f << stats.dump(2) << "\n";
    f.close();
    ctx.emit("preprocess/encode_stats.json");
}

void stage_train_gan(StageCtx& ctx) {
    const auto& cfg = ctx.cfg;
    const FeatureSchema schema = FeatureSchema::load(ctx.abs("preprocess/schema.json"));
    ctx.declare_input("preprocess/schema.json");
    const auto classes = cfg.gan_classes();

    struct Unit {
        Variant variant;
        ClassLabel label;
        std::size_t class_idx;
    };
    std::vector<Unit> units;
    for (auto v : cfg.variants) {
        for (auto c : classes) {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < 5; ++i) {
                if (kFiveClasses[i] == c) idx = i;
            }
            units.push_back({v, c, idx});
        }
    }
    for (auto c : classes) ctx.declare_input("preprocess/" + class_file("gan_train", c, ".csv"));

    parallel_units(units.size(), cfg.workers, [&](std::size_t u) {
        const Unit& unit = units[u];
        DatasetTable slice =
            load_table_csv(ctx.abs("preprocess/" + class_file("gan_train", unit.label, ".csv")),
                           schema);
        TrainConfig tc = cfg.gan;
        tc.variant = unit.variant;
        tc.seed = cfg.seed_base + unit.class_idx;
        tc.arch = cfg.arch_for(unit.variant);
        GanBundle bundle = build_bundle(tc, slice.width);
        TrainResult result = train_gan(bundle, slice.slice(), tc);

        const std::string tag = variant_name(unit.variant) + "_" + label_name(unit.label);
        save_network(bundle.generator, ctx.abs("train-gan/gen_" + tag + ".bin"));
        save_network(bundle.critic, ctx.abs("train-gan/critic_" + tag + ".bin"));
        if (bundle.js_discriminator) {
            save_network(*bundle.js_discriminator, ctx.abs("train-gan/disc_" + tag + ".bin"));
        }
        write_train_log(result, ctx.abs("train-gan/losses_" + tag + ".csv"));

        ctx.emit("train-gan/gen_" + tag + ".bin");
        ctx.emit("train-gan/critic_" + tag + ".bin");
        if (bundle.js_discriminator) ctx.emit("train-gan/disc_" + tag + ".bin");
        ctx.emit("train-gan/losses_" + tag + ".csv");
    });
}

void stage_synthesize(StageCtx& ctx) {
    const auto& cfg = ctx.cfg;
    const FeatureSchema schema = FeatureSchema::load(ctx.abs("preprocess/schema.json"));
    ctx.declare_input("preprocess/schema.json");
    const MixPlan plan = cfg.mix_plan();

    struct Unit {
        Variant variant;
        ClassLabel label;
        std::size_t count;
        std::size_t class_idx;
    };
    std::vector<Unit> units;
    for (auto v : cfg.variants) {
        for (const auto& [label, count] : plan.synthetic_counts) {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < 5; ++i) {
                if (kFiveClasses[i] == label) idx = i;
            }
            units.push_back({v, label, count, idx});
        }
    }

    parallel_units(units.size(), cfg.workers, [&](std::size_t u) {
        const Unit& unit = units[u];
        const std::string tag = variant_name(unit.variant) + "_" + label_name(unit.label);
        ctx.declare_input("train-gan/gen_" + tag + ".bin");
        Network gen = load_network(ctx.abs("train-gan/gen_" + tag + ".bin"));

        GanBundle bundle;
        bundle.variant = unit.variant;
        bundle.generator = std::move(gen);
        bundle.latent_dim = cfg.gan.latent_dim;
        bundle.data_dim = schema.encoded_width();

        Rng rng(derive_seed(cfg.seed_base + unit.class_idx, 0x73796e7468));
        Tensor samples = synthesize(bundle, unit.count, rng);
        DatasetTable table =
            make_synthetic_table(schema, samples, unit.label, variant_name(unit.variant));
        const std::string rel = "synthesize/synth_" + tag + ".csv";
        save_table_csv(table, ctx.abs(rel));
        ctx.emit(rel);
    });
}

void stage_mix(StageCtx& ctx) {
    const auto& cfg = ctx.cfg;
    const FeatureSchema schema = FeatureSchema::load(ctx.abs("preprocess/schema.json"));
    ctx.declare_input("preprocess/schema.json");
    ctx.declare_input("preprocess/train.csv");
    DatasetTable train = load_table_csv(ctx.abs("preprocess/train.csv"), schema);
    const MixPlan plan = cfg.mix_plan();

    for (auto v : cfg.variants) {
        std::map<ClassLabel, DatasetTable> synth;
        for (const auto& [label, count] : plan.synthetic_counts) {
            const std::string rel =
                "synthesize/synth_" + variant_name(v) + "_" + label_name(label) + ".csv";
            ctx.declare_input(rel);
            synth[label] = load_table_csv(ctx.abs(rel), schema);
        }
        DatasetTable mixed = build_training_set(train, synth, plan);
        const std::string rel = "mix/mixed_" + variant_name(v) + ".csv";
        save_table_csv(mixed, ctx.abs(rel));
        ctx.emit(rel);
    }

    if (cfg.task == TaskMode::Loao) {
        // baseline arm: no synthetic rows, same filtering and labeling
        MixPlan baseline_plan = plan;
        baseline_plan.synthetic_counts.clear();
        DatasetTable baseline = build_training_set(train, {}, baseline_plan);
        save_table_csv(baseline, ctx.abs("mix/mixed_baseline.csv"));
        ctx.emit("mix/mixed_baseline.csv");
    }
}

void stage_train_ids(StageCtx& ctx) {
    const auto& cfg = ctx.cfg;
    const FeatureSchema schema = FeatureSchema::load(ctx.abs("preprocess/schema.json"));
    ctx.declare_input("preprocess/schema.json");

    struct Unit {
        std::string arm;
        IdsKind kind;
        std::uint64_t seed;
    };
    std::vector<Unit> units;
    for (const auto& arm : arms_for(cfg)) {
        ctx.declare_input("mix/mixed_" + arm + ".csv");
        for (auto kind : cfg.ids_models) {
            for (auto seed : seeds_for_kind(cfg, kind)) units.push_back({arm, kind, seed});
        }
    }

    parallel_units(units.size(), cfg.workers, [&](std::size_t u) {
        const Unit& unit = units[u];
        DatasetTable mixed = load_table_csv(ctx.abs("mix/mixed_" + unit.arm + ".csv"), schema);
        IdsModel model;
        switch (unit.kind) {
            case IdsKind::Svm: model = train_svm(mixed, cfg.svm); break;
            case IdsKind::Dt: model = train_tree(mixed, cfg.tree); break;
            case IdsKind::Dnn: model = train_dnn(mixed, cfg.dnn, unit.seed); break;
        }
        model.seed = unit.seed;
        const std::string rel = "train-ids/model_" + unit.arm + "_" + ids_kind_name(unit.kind) +
                                "_" + std::to_string(unit.seed) + ".json";
        save_model(model, ctx.abs(rel));
        ctx.emit(rel);
    });
}

std::string metrics_header() {
    std::string h = "arm,model,task,seed,accuracy,macro_f1,auroc,tpr_at_5fpr";
    for (auto c : {ClassLabel::Normal, ClassLabel::Dos, ClassLabel::Probe, ClassLabel::U2r,
                   ClassLabel::R2l, ClassLabel::Abnormal}) {
        const std::string n = label_name(c);
        h += ",recall_" + n + ",precision_" + n + ",f1_" + n;
    }
    return h;
}

void stage_evaluate(StageCtx& ctx) {
    const auto& cfg = ctx.cfg;
    const FeatureSchema schema = FeatureSchema::load(ctx.abs("preprocess/schema.json"));
    ctx.declare_input("preprocess/schema.json");
    ctx.declare_input("preprocess/test.csv");
    DatasetTable test = load_table_csv(ctx.abs("preprocess/test.csv"), schema);

    DatasetTable test_task = test;
    if (cfg.task == TaskMode::Binary) {
        for (auto& l : test_task.labels) {
            if (l != ClassLabel::Normal) l = ClassLabel::Abnormal;
        }
    }
    DatasetTable seen = test_task, unseen;
    if (cfg.task == TaskMode::Loao) {
        std::tie(seen, unseen) = split_holdout_scores(test_task, *cfg.held_out);
    }

    const std::vector<ClassLabel> all_cols = {ClassLabel::Normal, ClassLabel::Dos,
                                              ClassLabel::Probe, ClassLabel::U2r, ClassLabel::R2l,
                                              ClassLabel::Abnormal};

    std::ofstream mf(ctx.abs("evaluate/metrics.csv"), std::ios::trunc);
    mf << metrics_header() << "\n";

    for (const auto& arm : arms_for(cfg)) {
        for (auto kind : cfg.ids_models) {
            for (auto seed : seeds_for_kind(cfg, kind)) {
                const std::string model_rel = "train-ids/model_" + arm + "_" +
                                              ids_kind_name(kind) + "_" + std::to_string(seed) +
                                              ".json";
                ctx.declare_input(model_rel);
                IdsModel model = load_model(ctx.abs(model_rel));

                const DatasetTable& eval_table = cfg.task == TaskMode::Loao ? seen : test_task;
                auto pred = predict_labels(model, eval_table);
                const double acc = multiclass_accuracy(eval_table.labels, pred);
                std::vector<ClassLabel> macro_classes = model.classes;
                const double mf1 = macro_f1(eval_table.labels, pred, macro_classes);

                double roc_auc = 0.0, tpr5 = 0.0;
                if (cfg.task == TaskMode::Loao) {
                    auto seen_scores = anomaly_scores(model, seen);
                    auto unseen_scores = anomaly_scores(model, unseen);
                    std::vector<double> scores = seen_scores;
                    scores.insert(scores.end(), unseen_scores.begin(), unseen_scores.end());
                    std::vector<int> labels(seen.rows(), 0);
                    labels.insert(labels.end(), unseen.rows(), 1);
                    roc_auc = auroc(scores, labels);
                    RocCurve roc = RocCurve::build(scores, labels);
                    tpr5 = tpr_at_fpr(roc, 0.05);

                    const std::string srel = "evaluate/scores_" + arm + "_" +
                                             ids_kind_name(kind) + "_" + std::to_string(seed) +
                                             ".csv";
                    std::ofstream sf(ctx.abs(srel), std::ios::trunc);
                    sf << "row,unseen,score\n";
                    char buf[96];
                    for (std::size_t i = 0; i < scores.size(); ++i) {
                        std::snprintf(buf, sizeof buf, "%zu,%d,%.17g\n", i, labels[i], scores[i]);
                        sf << buf;
                    }
                    sf.close();
                    ctx.emit(srel);
                }

                mf << arm << "," << ids_kind_name(kind) << "," << task_name(cfg.task) << ","
                   << seed;
                char buf[128];
                std::snprintf(buf, sizeof buf, ",%.17g,%.17g", acc, mf1);
                mf << buf;
                if (cfg.task == TaskMode::Loao) {
                    std::snprintf(buf, sizeof buf, ",%.17g,%.17g", roc_auc, tpr5);
                    mf << buf;
                } else {
                    mf << ",,";
                }
                for (auto c : all_cols) {
                    const bool present =
                        std::find(model.classes.begin(), model.classes.end(), c) !=
                        model.classes.end();
                    if (!present) {
                        mf << ",,,";
                        continue;
                    }
                    auto cm = confusion_binary(eval_table.labels, pred, c);
                    auto m = classification_metrics(cm);
                    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g", m.recall, m.precision,
                                  m.f1);
                    mf << buf;
                }
                mf << "\n";

                if (cfg.export_predictions && seed == seeds_for_kind(cfg, kind).front()) {
                    const std::string prel = "evaluate/predictions_" + arm + "_" +
                                             ids_kind_name(kind) + ".csv";
                    export_predictions_csv(model, eval_table, ctx.abs(prel));
                    ctx.emit(prel);
                }
            }
        }
    }
    mf.close();
    ctx.emit("evaluate/metrics.csv");

    // distribution alignment diagnostics per variant (synthetic vs real train)
    ctx.declare_input("preprocess/train.csv");
    DatasetTable train = load_table_csv(ctx.abs("preprocess/train.csv"), schema);
    const MixPlan plan = cfg.mix_plan();
    std::ofstream af(ctx.abs("evaluate/alignment.csv"), std::ios::trunc);
    af << "variant,class,frac_lt_eps,knn_p50,knn_p95,mmd2,mmd2_raw,js_binned,eps\n";
    char abuf[320];
    for (auto v : cfg.variants) {
        std::vector<double> p50s, p95s, mmds, fracs;
        std::vector<double> pooled_synth;
        std::size_t pooled_rows = 0;
        for (const auto& [label, count] : plan.synthetic_counts) {
            const std::string rel =
                "synthesize/synth_" + variant_name(v) + "_" + label_name(label) + ".csv";
            ctx.declare_input(rel);
            DatasetTable synth = load_table_csv(ctx.abs(rel), schema);
            DatasetTable real = filter_by_label(train, label);
            if (real.rows() == 0) continue;
            AlignmentReport rep = knn_alignment(
                view_of(synth.features, synth.rows(), synth.width),
                view_of(real.features, real.rows(), real.width));
            const double js = js_divergence_features(
                view_of(synth.features, synth.rows(), synth.width),
                view_of(real.features, real.rows(), real.width));
            std::snprintf(abuf, sizeof abuf,
                          "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          variant_name(v).c_str(), label_name(label).c_str(), rep.frac_lt_eps,
                          rep.knn_p50, rep.knn_p95, rep.mmd2, rep.mmd2_raw, js, rep.eps);
            af << abuf;
            p50s.push_back(rep.knn_p50);
            p95s.push_back(rep.knn_p95);
            mmds.push_back(rep.mmd2);
            fracs.push_back(rep.frac_lt_eps);
            pooled_synth.insert(pooled_synth.end(), synth.features.begin(), synth.features.end());
            pooled_rows += synth.rows();
        }
        if (!p50s.empty()) {
            std::snprintf(abuf, sizeof abuf, "%s,macro,%.17g,%.17g,%.17g,%.17g,,,\n",
                          variant_name(v).c_str(), mean_std(fracs).mean, mean_std(p50s).mean,
                          mean_std(p95s).mean, mean_std(mmds).mean);
            af << abuf;
        }
        if (pooled_rows >= 2 && train.rows() >= 2) {
            MatrixView sv{pooled_synth.data(), pooled_rows, train.width};
            MatrixView rv{train.features.data(), train.rows(), train.width};
            AlignmentReport rep = knn_alignment(sv, rv);
            std::snprintf(abuf, sizeof abuf, "%s,all,%.17g,%.17g,%.17g,%.17g,%.17g,,%.17g\n",
                          variant_name(v).c_str(), rep.frac_lt_eps, rep.knn_p50, rep.knn_p95,
                          rep.mmd2, rep.mmd2_raw, rep.eps);
            af << abuf;
        }
    }
    af.close();
    ctx.emit("evaluate/alignment.csv");
}

void stage_report(StageCtx& ctx) {
    const auto& cfg = ctx.cfg;
    ctx.declare_input("evaluate/metrics.csv");
    auto rows = load_metrics_csv(ctx.abs("evaluate/metrics.csv"));

    // roll-up: mean/std per (arm, model, task) across seeds
    std::map<std::string, std::vector<const MetricsRow*>> groups;
    for (const auto& r : rows) groups[r.arm + "," + r.model + "," + r.task].push_back(&r);

    std::ofstream rf(ctx.abs("report/rollup.csv"), std::ios::trunc);
    rf << "arm,model,task,seeds,mean_accuracy,std_accuracy,mean_macro_f1,std_macro_f1,"
          "mean_auroc,std_auroc,mean_tpr_at_5fpr,std_tpr_at_5fpr\n";
    char buf[256];
    for (const auto& [key, group] : groups) {
        std::vector<double> acc, mf1, auc, tpr;
        for (const auto* r : group) {
            acc.push_back(r->accuracy);
            mf1.push_back(r->macro_f1);
            auc.push_back(r->auroc);
            tpr.push_back(r->tpr_at_5fpr);
        }
        const MeanStd a = mean_std(acc), m = mean_std(mf1), u = mean_std(auc), t = mean_std(tpr);
        std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      key.c_str(), group.size(), a.mean, a.stddev, m.mean, m.stddev, u.mean,
                      u.stddev, t.mean, t.stddev);
        rf << buf;
    }
    rf.close();
    ctx.emit("report/rollup.csv");

    // aggregated loss curves, E rows per (variant, class)
    std::ofstream lf(ctx.abs("report/loss_curves.csv"), std::ios::trunc);
    lf << "variant,class,epoch,l_c_wasserstein,gp_term,l_c_total,l_d_bce,l_g_wasserstein,l_g_js,"
          "l_g_total,lambda_js\n";
    for (auto v : cfg.variants) {
        for (auto c : cfg.gan_classes()) {
            const std::string rel =
                "train-gan/losses_" + variant_name(v) + "_" + label_name(c) + ".csv";
            ctx.declare_input(rel);
            std::ifstream in(ctx.abs(rel));
            if (!in) throw IoError("report: missing " + rel);
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                lf << variant_name(v) << "," << label_name(c) << "," << line << "\n";
            }
        }
    }
    lf.close();
    ctx.emit("report/loss_curves.csv");

    // class distributions of every dataset artifact (original, mixed, test)
    const FeatureSchema schema = FeatureSchema::load(ctx.abs("preprocess/schema.json"));
    ctx.declare_input("preprocess/schema.json");
    std::ofstream cf(ctx.abs("report/class_distribution.csv"), std::ios::trunc);
    cf << "dataset,class,count,fraction\n";
    auto dump_hist = [&](const std::string& name, const DatasetTable& t) {
        auto hist = label_histogram(t);
        for (const auto& [label, count] : hist) {
            std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.17g\n", name.c_str(),
                          label_name(label).c_str(), count,
                          static_cast<double>(count) / static_cast<double>(t.rows()));
            cf << buf;
        }
    };
    ctx.declare_input("preprocess/train.csv");
    dump_hist("train_original", load_table_csv(ctx.abs("preprocess/train.csv"), schema));
    ctx.declare_input("preprocess/test.csv");
    dump_hist("test", load_table_csv(ctx.abs("preprocess/test.csv"), schema));
    for (const auto& arm : arms_for(cfg)) {
        const std::string rel = "mix/mixed_" + arm + ".csv";
        ctx.declare_input(rel);
        dump_hist("mixed_" + arm, load_table_csv(ctx.abs(rel), schema));
    }
    cf.close();
    ctx.emit("report/class_distribution.csv");

    // ROC point lists from the stored score files (loao arms only)
    if (cfg.task == TaskMode::Loao) {
        for (const auto& arm : arms_for(cfg)) {
            for (auto kind : cfg.ids_models) {
                for (auto seed : seeds_for_kind(cfg, kind)) {
                    const std::string srel = "evaluate/scores_" + arm + "_" +
                                             ids_kind_name(kind) + "_" + std::to_string(seed) +
                                             ".csv";
                    ctx.declare_input(srel);
                    std::ifstream in(ctx.abs(srel));
                    if (!in) throw IoError("report: missing " + srel);
                    std::string line;
                    std::getline(in, line);
                    std::vector<double> scores;
                    std::vector<int> labels;
                    while (std::getline(in, line)) {
                        if (line.empty()) continue;
                        std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
                        labels.push_back(std::stoi(line.substr(c1 + 1, c2 - c1 - 1)));
                        scores.push_back(std::stod(line.substr(c2 + 1)));
                    }
                    RocCurve roc = RocCurve::build(scores, labels);
                    const std::string rrel = "report/roc_" + arm + "_" + ids_kind_name(kind) +
                                             "_" + std::to_string(seed) + ".csv";
                    std::ofstream rfout(ctx.abs(rrel), std::ios::trunc);
                    rfout << "fpr,tpr\n";
                    for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
                        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", roc.fpr[i], roc.tpr[i]);
                        rfout << buf;
                    }
                    rfout.close();
                    ctx.emit(rrel);
                }
            }
        }
    }
}

using StageFn = void (*)(StageCtx&);

StageFn stage_fn(const std::string& name) {
    if (name == "preprocess") return stage_preprocess;
    if (name == "train-gan") return stage_train_gan;
    if (name == "synthesize") return stage_synthesize;
    if (name == "mix") return stage_mix;
    if (name == "train-ids") return stage_train_ids;
    if (name == "evaluate") return stage_evaluate;
    if (name == "report") return stage_report;
    throw ConfigError("unknown stage " + name);
}

// marker files record the config hash plus artifact checksums for resume
json marker_json(std::uint64_t hash, const StageRecord& rec) {
    json j;
    j["config_hash"] = hash;
    j["inputs"] = rec.inputs;
    j["artifacts"] = json::array();
    for (const auto& a : rec.artifacts) {
        j["artifacts"].push_back({{"path", a.path}, {"checksum", a.checksum}});
    }
    return j;
}

bool try_resume(const fs::path& out, const std::string& stage, std::uint64_t hash,
                StageRecord& rec) {
    const fs::path marker = out / (stage + ".done");
    if (!fs::exists(marker)) return false;
    std::ifstream f(marker);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) return false;
    if (j.at("config_hash").get<std::uint64_t>() != hash) {
        throw ConfigError("resume: config hash mismatch for stage '" + stage +
                          "' (the output directory belongs to a different configuration)");
    }
    for (const auto& ja : j.at("artifacts")) {
        const std::string rel = ja.at("path").get<std::string>();
        const fs::path p = out / rel;
        if (!fs::exists(p)) return false;  // missing artifact: re-run the stage
        if (fnv1a_file(p.string()) != ja.at("checksum").get<std::uint64_t>()) return false;
    }
    rec.inputs = j.at("inputs").get<std::vector<std::string>>();
    for (const auto& ja : j.at("artifacts")) {
        rec.artifacts.push_back(
            {ja.at("path").get<std::string>(), ja.at("checksum").get<std::uint64_t>()});
    }
    rec.skipped = true;
    return true;
}

}  // namespace

std::vector<MetricsRow> load_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("load_metrics_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("load_metrics_csv: empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) header.push_back(field);
    }
    std::vector<MetricsRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        fields.resize(header.size());
        MetricsRow r;
        for (std::size_t i = 0; i < header.size(); ++i) {
            const std::string& key = header[i];
            const std::string& v = fields[i];
            if (key == "arm") r.arm = v;
            else if (key == "model") r.model = v;
            else if (key == "task") r.task = v;
            else if (key == "seed") r.seed = v.empty() ? 0 : std::stoull(v);
            else if (key == "accuracy") r.accuracy = v.empty() ? 0.0 : std::stod(v);
            else if (key == "macro_f1") r.macro_f1 = v.empty() ? 0.0 : std::stod(v);
            else if (key == "auroc") r.auroc = v.empty() ? 0.0 : std::stod(v);
            else if (key == "tpr_at_5fpr") r.tpr_at_5fpr = v.empty() ? 0.0 : std::stod(v);
            else if (key.rfind("recall_", 0) == 0 && !v.empty()) {
                r.per_class[key.substr(7)][0] = std::stod(v);
            } else if (key.rfind("precision_", 0) == 0 && !v.empty()) {
                r.per_class[key.substr(10)][1] = std::stod(v);
            } else if (key.rfind("f1_", 0) == 0 && !v.empty()) {
                r.per_class[key.substr(3)][2] = std::stod(v);
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::size_t scan_training_artifacts_for_label(const std::string& out_dir, ClassLabel label) {
    const std::string needle = label_name(label);
    std::size_t hits = 0;
    auto scan_csv = [&](const fs::path& p) {
        std::ifstream f(p);
        std::string line;
        std::getline(f, line);  // header: label,provenance,...
        while (std::getline(f, line)) {
            if (line.rfind(needle + ",", 0) == 0) hits++;
        }
    };
    const fs::path out(out_dir);
    const std::vector<std::pair<std::string, std::string>> targets = {
        {"preprocess", "train.csv"},   {"preprocess", "gan_train_"},
        {"synthesize", "synth_"},      {"mix", "mixed_"},
    };
    for (const auto& [dir, prefix] : targets) {
        const fs::path d = out / dir;
        if (!fs::exists(d)) continue;
        for (const auto& entry : fs::directory_iterator(d)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind(prefix, 0) == 0 && name.size() >= 4 &&
                name.substr(name.size() - 4) == ".csv") {
                scan_csv(entry.path());
            }
        }
    }
    return hits;
}

void check_manifest_closure(const ExperimentConfig& cfg, const RunManifest& manifest) {
    std::set<std::string> produced = {cfg.train_path, cfg.test_path};
    for (const auto& stage : manifest.stages) {
        for (const auto& input : stage.inputs) {
            if (!produced.count(input)) {
                throw ProtocolError("manifest closure: stage '" + stage.name +
                                    "' reads undeclared artifact '" + input + "'");
            }
        }
        for (const auto& a : stage.artifacts) produced.insert(a.path);
    }
}

namespace {

RunManifest run_stages(const ExperimentConfig& cfg, bool resume, bool loao_checks,
                       const std::string& last_stage) {
    cfg.validate();
    if (std::find(kStageOrder.begin(), kStageOrder.end(), last_stage) == kStageOrder.end()) {
        throw ConfigError("run: unknown stage '" + last_stage + "'");
    }
    if (cfg.train_path.empty() || cfg.test_path.empty()) {
        throw ConfigError("run: data.train and data.test are required");
    }
    const fs::path out(cfg.out_dir);
    for (const auto& sub :
         {"", "preprocess", "train-gan", "synthesize", "mix", "train-ids", "evaluate", "report"}) {
        fs::create_directories(out / sub);
    }
    const std::uint64_t hash = cfg.config_hash();

    RunManifest manifest;
    manifest.version = kVersion;
    manifest.config_hash = hash;

    bool upstream_ran = false;  // once a stage executes, later stages must rebuild
    for (const auto& stage : kStageOrder) {
        StageRecord rec;
        rec.name = stage;
        if (resume && !upstream_ran && try_resume(out, stage, hash, rec)) {
            manifest.stages.push_back(std::move(rec));
            if (stage == last_stage) break;
            continue;
        }
        upstream_ran = true;
        StageCtx ctx{cfg, out, &rec, {}};
        const auto t0 = std::chrono::steady_clock::now();
        stage_fn(stage)(ctx);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        // stable artifact order regardless of worker interleaving
        std::sort(rec.artifacts.begin(), rec.artifacts.end(),
                  [](const ArtifactRecord& a, const ArtifactRecord& b) { return a.path < b.path; });
        std::sort(rec.inputs.begin(), rec.inputs.end());

        if (loao_checks && (stage == "preprocess" || stage == "synthesize" || stage == "mix")) {
            const std::size_t hits = scan_training_artifacts_for_label(cfg.out_dir, *cfg.held_out);
            if (hits != 0) {
                throw ProtocolError("loao: " + std::to_string(hits) + " " +
                                    label_name(*cfg.held_out) +
                                    " rows found in training artifacts after stage " + stage);
            }
        }

        std::ofstream mf((out / (stage + ".done")).string(), std::ios::trunc);
        mf << marker_json(hash, rec).dump(2) << "\n";
        manifest.stages.push_back(std::move(rec));
        if (stage == last_stage) break;
    }

    check_manifest_closure(cfg, manifest);
    manifest.save((out / "manifest.json").string());
    return manifest;
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& cfg, bool resume, const std::string& last_stage) {
    return run_stages(cfg, resume, cfg.task == TaskMode::Loao, last_stage);
}

RunManifest run_loao(const ExperimentConfig& cfg, bool resume) {
    if (cfg.task != TaskMode::Loao) {
        throw ConfigError("run_loao: mix.task must be 'loao'");
    }
    return run_stages(cfg, resume, /*loao_checks=*/true, "report");
}

void emit_report(const ExperimentConfig& cfg, const RunManifest&) {
    StageRecord rec;
    rec.name = "report";
    StageCtx ctx{cfg, fs::path(cfg.out_dir), &rec, {}};
    stage_report(ctx);
}

}  // namespace ganids
