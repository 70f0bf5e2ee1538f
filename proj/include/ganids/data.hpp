#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ganids/errors.hpp"
#include "ganids/tensor.hpp"
#include "ganids/trainer.hpp"

namespace ganids {

// Five traffic classes plus the binary-task collapse of the four attacks.
enum class ClassLabel { Normal, Dos, Probe, U2r, R2l, Abnormal };

std::string label_name(ClassLabel l);
// Accepts class names ("normal", "dos", ...) and the standard raw attack
// names ("neptune", "satan", ...). Unknown labels are ingestion errors.
ClassLabel label_from(const std::string& s);

constexpr ClassLabel kFiveClasses[] = {ClassLabel::Normal, ClassLabel::Dos, ClassLabel::Probe,
                                       ClassLabel::U2r, ClassLabel::R2l};

struct FeatureColumn {
    enum class Kind { Numeric, Binary, Nominal };
    Kind kind = Kind::Numeric;
    double min = 0.0;                     // numeric only, from training data
    double max = 0.0;
    std::vector<std::string> categories;  // nominal only, sorted lexicographically

    std::size_t encoded_width() const {
        return kind == Kind::Nominal ? categories.size() : 1;
    }
    bool operator==(const FeatureColumn&) const = default;
};

struct FeatureSchema {
    std::vector<FeatureColumn> columns;

    std::size_t raw_width() const { return columns.size(); }
    std::size_t encoded_width() const;
    std::size_t encoded_offset(std::size_t col) const;

    // Inverse of the numeric scaling, for in-range encoded values.
    double decode_numeric(std::size_t col, double encoded) const;

    std::string to_json() const;  // doubles as hexfloat strings, bit-exact
    static FeatureSchema from_json(const std::string& text);
    void save(const std::string& path) const;
    static FeatureSchema load(const std::string& path);

    bool operator==(const FeatureSchema&) const = default;
};

// Rows as parsed text plus their labels, before encoding.
struct RawDataset {
    std::vector<std::vector<std::string>> features;  // rows x raw_width
    std::vector<std::string> labels;
};

// Comma-separated records, one per line: features..., label and an optional
// trailing numeric difficulty column (detected and dropped).
RawDataset read_raw_csv(const std::string& path);

// Schema from training rows only: numeric min/max, binary iff the value set
// is exactly {0,1}, nominal categories enumerated and sorted.
FeatureSchema fit_schema(const RawDataset& train);

struct EncodeStats {
    std::size_t clamped = 0;            // numeric values outside the fitted range
    std::size_t unseen_categories = 0;  // nominal values absent from the schema
};

struct DatasetTable {
    FeatureSchema schema;
    std::size_t width = 0;  // encoded width
    std::vector<double> features;  // rows x width, all in [-1,1]
    std::vector<ClassLabel> labels;
    std::vector<std::string> provenance;  // "original" or "synthetic:<variant>"

    std::size_t rows() const { return labels.size(); }
    DataSlice slice() const { return DataSlice{features.data(), rows(), width}; }
    void validate() const;
};

// Numeric: 2(x-min)/(max-min)-1 clamped to [-1,1]; constant columns encode
// to 0. Binary: {-1,+1}. Nominal: one-hot with hot=+1, cold=-1; unseen test
// categories encode all-cold. Out-of-range and unseen events are counted.
DatasetTable encode(const RawDataset& rows, const FeatureSchema& schema,
                    EncodeStats* stats = nullptr);

// Synthetic rows stay in encoded space; the label comes from the per-class
// generator that produced them.
DatasetTable make_synthetic_table(const FeatureSchema& schema, const Tensor& samples,
                                  ClassLabel label, const std::string& variant);

enum class TaskMode { Binary, Multi, Loao };
std::string task_name(TaskMode t);
TaskMode task_from(const std::string& s);

struct MixPlan {
    std::map<ClassLabel, std::size_t> synthetic_counts;
    TaskMode mode = TaskMode::Multi;
    std::optional<ClassLabel> held_out;  // loao only

    void validate() const;
};

// Concatenates originals with the planned number of synthetic rows per
// class. Binary mode relabels the four attack classes to Abnormal. Loao mode
// drops every held-out-class row from the originals and rejects plans that
// request synthetics for it.
DatasetTable build_training_set(const DatasetTable& original,
                                const std::map<ClassLabel, DatasetTable>& synthetic,
                                const MixPlan& plan);

// Partition of the test set into seen-class rows and held-out-class rows.
std::pair<DatasetTable, DatasetTable> split_holdout_scores(const DatasetTable& test,
                                                           ClassLabel held_out);

DatasetTable filter_by_label(const DatasetTable& table, ClassLabel label);
std::map<ClassLabel, std::size_t> label_histogram(const DatasetTable& table);

void save_table_csv(const DatasetTable& table, const std::string& path);
DatasetTable load_table_csv(const std::string& path, const FeatureSchema& schema);

}  // namespace ganids
