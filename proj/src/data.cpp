#include "ganids/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace ganids {

using nlohmann::json;

std::string label_name(ClassLabel l) {
    switch (l) {
        case ClassLabel::Normal: return "normal";
        case ClassLabel::Dos: return "dos";
        case ClassLabel::Probe: return "probe";
        case ClassLabel::U2r: return "u2r";
        case ClassLabel::R2l: return "r2l";
        case ClassLabel::Abnormal: return "abnormal";
    }
    throw IngestError("unknown class label");
}

namespace {

// Standard NSL-KDD attack-name taxonomy.
const std::unordered_map<std::string, ClassLabel>& attack_table() {
    static const std::unordered_map<std::string, ClassLabel> t = {
        {"normal", ClassLabel::Normal},
        {"dos", ClassLabel::Dos},
        {"probe", ClassLabel::Probe},
        {"u2r", ClassLabel::U2r},
        {"r2l", ClassLabel::R2l},
        {"abnormal", ClassLabel::Abnormal},
        // DoS
        {"back", ClassLabel::Dos},
        {"land", ClassLabel::Dos},
        {"neptune", ClassLabel::Dos},
        {"pod", ClassLabel::Dos},
        {"smurf", ClassLabel::Dos},
        {"teardrop", ClassLabel::Dos},
        {"apache2", ClassLabel::Dos},
        {"udpstorm", ClassLabel::Dos},
        {"processtable", ClassLabel::Dos},
        {"mailbomb", ClassLabel::Dos},
        {"worm", ClassLabel::Dos},
        // Probe
        {"satan", ClassLabel::Probe},
        {"ipsweep", ClassLabel::Probe},
        {"nmap", ClassLabel::Probe},
        {"portsweep", ClassLabel::Probe},
        {"mscan", ClassLabel::Probe},
        {"saint", ClassLabel::Probe},
        // R2L
        {"guess_passwd", ClassLabel::R2l},
        {"ftp_write", ClassLabel::R2l},
        {"imap", ClassLabel::R2l},
        {"phf", ClassLabel::R2l},
        {"multihop", ClassLabel::R2l},
        {"warezmaster", ClassLabel::R2l},
        {"warezclient", ClassLabel::R2l},
        {"spy", ClassLabel::R2l},
        {"xlock", ClassLabel::R2l},
        {"xsnoop", ClassLabel::R2l},
        {"snmpguess", ClassLabel::R2l},
        {"snmpgetattack", ClassLabel::R2l},
        {"httptunnel", ClassLabel::R2l},
        {"sendmail", ClassLabel::R2l},
        {"named", ClassLabel::R2l},
        // U2R
        {"buffer_overflow", ClassLabel::U2r},
        {"loadmodule", ClassLabel::U2r},
        {"rootkit", ClassLabel::U2r},
        {"perl", ClassLabel::U2r},
        {"sqlattack", ClassLabel::U2r},
        {"xterm", ClassLabel::U2r},
        {"ps", ClassLabel::U2r},
    };
    return t;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool parse_double(const std::string& s, double* out) {
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    if (!std::isfinite(v)) return false;
    *out = v;
    return true;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double unhex_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw IoError("schema: bad hexfloat '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

ClassLabel label_from(const std::string& s) {
    const auto& t = attack_table();
    auto it = t.find(lower(s));
    if (it == t.end()) throw IngestError("unknown label '" + s + "'");
    return it->second;
}

std::string task_name(TaskMode t) {
    switch (t) {
        case TaskMode::Binary: return "binary";
        case TaskMode::Multi: return "multi";
        case TaskMode::Loao: return "loao";
    }
    throw ConfigError("unknown task mode");
}

TaskMode task_from(const std::string& s) {
    if (s == "binary") return TaskMode::Binary;
    if (s == "multi") return TaskMode::Multi;
    if (s == "loao") return TaskMode::Loao;
    throw ConfigError("unknown task mode '" + s + "'");
}

// ---- schema ----

std::size_t FeatureSchema::encoded_width() const {
    std::size_t w = 0;
    for (const auto& c : columns) w += c.encoded_width();
    return w;
}

std::size_t FeatureSchema::encoded_offset(std::size_t col) const {
    if (col >= columns.size()) throw ContractError("encoded_offset: column out of range");
    std::size_t off = 0;
    for (std::size_t i = 0; i < col; ++i) off += columns[i].encoded_width();
    return off;
}

double FeatureSchema::decode_numeric(std::size_t col, double encoded) const {
    const auto& c = columns.at(col);
    if (c.kind != FeatureColumn::Kind::Numeric) {
        throw ContractError("decode_numeric: column is not numeric");
    }
    if (c.max == c.min) return c.min;
    return c.min + (encoded + 1.0) * 0.5 * (c.max - c.min);
}

std::string FeatureSchema::to_json() const {
    json j;
    j["version"] = 1;
    j["columns"] = json::array();
    for (const auto& c : columns) {
        json jc;
        switch (c.kind) {
            case FeatureColumn::Kind::Numeric:
                jc["kind"] = "numeric";
                jc["min"] = hex_double(c.min);
                jc["max"] = hex_double(c.max);
                break;
            case FeatureColumn::Kind::Binary:
                jc["kind"] = "binary";
                break;
            case FeatureColumn::Kind::Nominal:
                jc["kind"] = "nominal";
                jc["categories"] = c.categories;
                break;
        }
        j["columns"].push_back(jc);
    }
    return j.dump(2);
}

FeatureSchema FeatureSchema::from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("version").get<int>() != 1) throw IoError("schema: unsupported version");
    FeatureSchema s;
    for (const auto& jc : j.at("columns")) {
        FeatureColumn c;
        const std::string kind = jc.at("kind").get<std::string>();
        if (kind == "numeric") {
            c.kind = FeatureColumn::Kind::Numeric;
            c.min = unhex_double(jc.at("min").get<std::string>());
            c.max = unhex_double(jc.at("max").get<std::string>());
        } else if (kind == "binary") {
            c.kind = FeatureColumn::Kind::Binary;
        } else if (kind == "nominal") {
            c.kind = FeatureColumn::Kind::Nominal;
            c.categories = jc.at("categories").get<std::vector<std::string>>();
        } else {
            throw IoError("schema: unknown column kind '" + kind + "'");
        }
        s.columns.push_back(std::move(c));
    }
    return s;
}

void FeatureSchema::save(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("schema save: cannot open " + path);
    f << to_json() << "\n";
    if (!f) throw IoError("schema save: write failed for " + path);
}

FeatureSchema FeatureSchema::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("schema load: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

// ---- ingestion ----

RawDataset read_raw_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_raw_csv: cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (width == 0) {
            width = fields.size();
            if (width < 2) throw IngestError("read_raw_csv: need at least one feature and a label");
        } else if (fields.size() != width) {
            throw IngestError("read_raw_csv: inconsistent column count at line " +
                              std::to_string(line_no));
        }
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw IngestError("read_raw_csv: no records in " + path);

    // Layout: features..., label[, difficulty]. The trailing difficulty
    // column is numeric on every row while the label column is not.
    bool last_all_numeric = true;
    bool second_last_all_numeric = true;
    for (const auto& r : rows) {
        double tmp;
        if (!parse_double(r[width - 1], &tmp)) last_all_numeric = false;
        if (width >= 2 && !parse_double(r[width - 2], &tmp)) second_last_all_numeric = false;
    }
    const bool has_difficulty = last_all_numeric && !second_last_all_numeric && width >= 3;
    const std::size_t label_idx = has_difficulty ? width - 2 : width - 1;

    RawDataset out;
    out.features.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (auto& r : rows) {
        out.labels.push_back(r[label_idx]);
        r.resize(label_idx);
        out.features.push_back(std::move(r));
    }
    return out;
}

FeatureSchema fit_schema(const RawDataset& train) {
    if (train.features.empty()) throw IngestError("fit_schema: empty dataset");
    const std::size_t w = train.features[0].size();
    FeatureSchema schema;
    schema.columns.resize(w);

    for (std::size_t c = 0; c < w; ++c) {
        bool numeric = true;
        double mn = 0, mx = 0;
        bool first = true;
        std::set<double> numeric_values;
        std::set<std::string> cats;
        for (std::size_t r = 0; r < train.features.size(); ++r) {
            const std::string& s = train.features[r][c];
            double v;
            if (numeric && parse_double(s, &v)) {
                if (first) {
                    mn = mx = v;
                    first = false;
                } else {
                    mn = std::min(mn, v);
                    mx = std::max(mx, v);
                }
                if (numeric_values.size() <= 2) numeric_values.insert(v);
            } else {
                numeric = false;
            }
            if (!numeric) cats.insert(s);
        }
        auto& col = schema.columns[c];
        if (!numeric) {
            // Re-scan so rows before the first non-numeric value are included.
            cats.clear();
            for (const auto& row : train.features) cats.insert(row[c]);
            col.kind = FeatureColumn::Kind::Nominal;
            col.categories.assign(cats.begin(), cats.end());  // set is sorted
        } else if (numeric_values.size() == 2 && numeric_values.count(0.0) &&
                   numeric_values.count(1.0)) {
            col.kind = FeatureColumn::Kind::Binary;
        } else {
            col.kind = FeatureColumn::Kind::Numeric;
            col.min = mn;
            col.max = mx;
        }
    }
    return schema;
}

void DatasetTable::validate() const {
    if (rows() == 0) throw ContractError("DatasetTable: row count must be positive");
    if (features.size() != rows() * width) throw DimensionError("DatasetTable: feature size");
    if (provenance.size() != rows()) throw DimensionError("DatasetTable: provenance size");
    for (double v : features) {
        if (!(v >= -1.0 && v <= 1.0)) {
            throw ContractError("DatasetTable: feature outside [-1,1]");
        }
    }
}

DatasetTable encode(const RawDataset& rows, const FeatureSchema& schema, EncodeStats* stats) {
    const std::size_t n = rows.features.size();
    if (n == 0) throw IngestError("encode: empty dataset");
    const std::size_t raw_w = schema.raw_width();
    const std::size_t enc_w = schema.encoded_width();

    DatasetTable out;
    out.schema = schema;
    out.width = enc_w;
    out.features.assign(n * enc_w, -1.0);
    out.labels.reserve(n);
    out.provenance.assign(n, "original");
    EncodeStats local;

    for (std::size_t r = 0; r < n; ++r) {
        if (rows.features[r].size() != raw_w) {
            throw IngestError("encode: row " + std::to_string(r) + " has " +
                              std::to_string(rows.features[r].size()) + " features, expected " +
                              std::to_string(raw_w));
        }
        double* dst = out.features.data() + r * enc_w;
        std::size_t off = 0;
        for (std::size_t c = 0; c < raw_w; ++c) {
            const auto& col = schema.columns[c];
            const std::string& s = rows.features[r][c];
            switch (col.kind) {
                case FeatureColumn::Kind::Numeric: {
                    double v;
                    if (!parse_double(s, &v)) {
                        throw IngestError("encode: non-numeric value '" + s +
                                          "' in numeric column " + std::to_string(c) + " at row " +
                                          std::to_string(r));
                    }
                    if (col.max == col.min) {
                        dst[off] = 0.0;  // constant column: midpoint
                        if (v != col.min) local.clamped++;
                    } else {
                        double e = 2.0 * (v - col.min) / (col.max - col.min) - 1.0;
                        if (e < -1.0 || e > 1.0) {
                            e = std::clamp(e, -1.0, 1.0);
                            local.clamped++;
                        }
                        dst[off] = e;
                    }
                    off += 1;
                    break;
                }
                case FeatureColumn::Kind::Binary: {
                    double v;
                    if (!parse_double(s, &v)) {
                        throw IngestError("encode: non-numeric value '" + s +
                                          "' in binary column " + std::to_string(c) + " at row " +
                                          std::to_string(r));
                    }
                    if (v != 0.0 && v != 1.0) local.clamped++;
                    dst[off] = v >= 0.5 ? 1.0 : -1.0;
                    off += 1;
                    break;
                }
                case FeatureColumn::Kind::Nominal: {
                    auto it = std::lower_bound(col.categories.begin(), col.categories.end(), s);
                    if (it != col.categories.end() && *it == s) {
                        dst[off + static_cast<std::size_t>(it - col.categories.begin())] = 1.0;
                    } else {
                        local.unseen_categories++;  // all-cold
                    }
                    off += col.categories.size();
                    break;
                }
            }
        }
        try {
            out.labels.push_back(label_from(rows.labels[r]));
        } catch (const IngestError&) {
            throw IngestError("encode: unknown label '" + rows.labels[r] + "' at row " +
                              std::to_string(r));
        }
    }
    if (stats) *stats = local;
    out.validate();
    return out;
}

DatasetTable make_synthetic_table(const FeatureSchema& schema, const Tensor& samples,
                                  ClassLabel label, const std::string& variant) {
    if (samples.shape().size() != 2 || samples.shape()[1] != schema.encoded_width()) {
        throw DimensionError("make_synthetic_table: sample width does not match schema");
    }
    DatasetTable out;
    out.schema = schema;
    out.width = schema.encoded_width();
    out.features = samples.values();
    out.labels.assign(samples.shape()[0], label);
    out.provenance.assign(samples.shape()[0], "synthetic:" + variant);
    out.validate();
    return out;
}

// ---- mixing ----

void MixPlan::validate() const {
    if (mode == TaskMode::Loao) {
        if (!held_out.has_value()) throw PlanError("MixPlan: loao mode requires a held-out class");
        auto it = synthetic_counts.find(*held_out);
        if (it != synthetic_counts.end() && it->second > 0) {
            throw PlanError("MixPlan: loao mode forbids synthetic rows for the held-out class");
        }
    }
}

DatasetTable build_training_set(const DatasetTable& original,
                                const std::map<ClassLabel, DatasetTable>& synthetic,
                                const MixPlan& plan) {
    plan.validate();
    DatasetTable out;
    out.schema = original.schema;
    out.width = original.width;

    auto append = [&](const DatasetTable& src, std::size_t limit, bool skip_held_out) {
        std::size_t taken = 0;
        for (std::size_t r = 0; r < src.rows() && taken < limit; ++r) {
            if (skip_held_out && plan.mode == TaskMode::Loao && src.labels[r] == *plan.held_out) {
                continue;
            }
            out.features.insert(out.features.end(), src.features.begin() + r * src.width,
                                src.features.begin() + (r + 1) * src.width);
            out.labels.push_back(src.labels[r]);
            out.provenance.push_back(src.provenance[r]);
            ++taken;
        }
        return taken;
    };

    append(original, original.rows(), /*skip_held_out=*/true);

    for (const auto& [label, count] : plan.synthetic_counts) {
        if (count == 0) continue;
        auto it = synthetic.find(label);
        if (it == synthetic.end()) {
            throw PlanError("build_training_set: no synthetic table for class " +
                            label_name(label));
        }
        if (it->second.width != original.width) {
            throw DimensionError("build_training_set: synthetic width mismatch for class " +
                                 label_name(label));
        }
        if (it->second.rows() < count) {
            throw PlanError("build_training_set: plan wants " + std::to_string(count) + " " +
                            label_name(label) + " rows, only " + std::to_string(it->second.rows()) +
                            " available");
        }
        append(it->second, count, /*skip_held_out=*/false);
    }

    if (plan.mode == TaskMode::Binary) {
        for (auto& l : out.labels) {
            if (l != ClassLabel::Normal) l = ClassLabel::Abnormal;
        }
    }
    out.validate();
    return out;
}

std::pair<DatasetTable, DatasetTable> split_holdout_scores(const DatasetTable& test,
                                                           ClassLabel held_out) {
    std::size_t held = 0;
    for (auto l : test.labels) held += l == held_out;
    if (held == 0) {
        throw ProtocolError("split_holdout_scores: class " + label_name(held_out) +
                            " absent from the test set");
    }
    DatasetTable seen, unseen;
    seen.schema = unseen.schema = test.schema;
    seen.width = unseen.width = test.width;
    for (std::size_t r = 0; r < test.rows(); ++r) {
        DatasetTable& dst = test.labels[r] == held_out ? unseen : seen;
        dst.features.insert(dst.features.end(), test.features.begin() + r * test.width,
                            test.features.begin() + (r + 1) * test.width);
        dst.labels.push_back(test.labels[r]);
        dst.provenance.push_back(test.provenance[r]);
    }
    return {std::move(seen), std::move(unseen)};
}

DatasetTable filter_by_label(const DatasetTable& table, ClassLabel label) {
    DatasetTable out;
    out.schema = table.schema;
    out.width = table.width;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (table.labels[r] != label) continue;
        out.features.insert(out.features.end(), table.features.begin() + r * table.width,
                            table.features.begin() + (r + 1) * table.width);
        out.labels.push_back(table.labels[r]);
        out.provenance.push_back(table.provenance[r]);
    }
    return out;
}

std::map<ClassLabel, std::size_t> label_histogram(const DatasetTable& table) {
    std::map<ClassLabel, std::size_t> out;
    for (auto l : table.labels) out[l]++;
    return out;
}

void save_table_csv(const DatasetTable& table, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("save_table_csv: cannot open " + path);
    f << "label,provenance";
    for (std::size_t j = 0; j < table.width; ++j) f << ",f" << j;
    f << "\n";
    for (std::size_t r = 0; r < table.rows(); ++r) {
        f << label_name(table.labels[r]) << "," << table.provenance[r];
        for (std::size_t j = 0; j < table.width; ++j) {
            f << "," << fmt_double(table.features[r * table.width + j]);
        }
        f << "\n";
    }
    if (!f) throw IoError("save_table_csv: write failed for " + path);
}

DatasetTable load_table_csv(const std::string& path, const FeatureSchema& schema) {
    std::ifstream f(path);
    if (!f) throw IoError("load_table_csv: cannot open " + path);
    DatasetTable out;
    out.schema = schema;
    out.width = schema.encoded_width();
    std::string line;
    if (!std::getline(f, line)) throw IoError("load_table_csv: empty file " + path);
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != out.width + 2) {
            throw IoError("load_table_csv: bad field count at line " + std::to_string(line_no));
        }
        out.labels.push_back(label_from(fields[0]));
        out.provenance.push_back(fields[1]);
        for (std::size_t j = 0; j < out.width; ++j) {
            double v;
            if (!parse_double(fields[j + 2], &v)) {
                throw IoError("load_table_csv: bad number at line " + std::to_string(line_no));
            }
            out.features.push_back(v);
        }
    }
    out.validate();
    return out;
}

}  // namespace ganids
