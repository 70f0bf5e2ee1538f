#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganids/data.hpp"
#include "ganids/layers.hpp"

namespace ganids {

enum class IdsKind { Svm, Dt, Dnn };

std::string ids_kind_name(IdsKind k);
IdsKind ids_kind_from(const std::string& s);

// One-vs-rest linear models, one hyperplane per class.
struct SvmModel {
    std::vector<std::vector<double>> weights;  // [class][width]
    std::vector<double> bias;                  // [class]
};

// Flat tree storage; node 0 is the root. Leaves carry the class
// distribution over the model's class list.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> class_dist;
};

struct TreeModel {
    std::vector<TreeNode> nodes;
};

struct IdsModel {
    IdsKind kind = IdsKind::Svm;
    std::vector<ClassLabel> classes;  // sorted; defines the score column order
    std::size_t input_width = 0;
    std::uint64_t seed = 0;
    SvmModel svm;
    TreeModel tree;
    Network dnn;
};

struct SvmConfig {
    double c_reg = 1.0;            // regularization strength
    std::size_t iterations = 2000;  // full-batch subgradient steps, eta_t = 1/(c_reg*t)
};

// Deterministic linear SVM: no seed dependence, identical inputs give
// bitwise-identical weights.
IdsModel train_svm(const DatasetTable& data, const SvmConfig& cfg = {});

struct TreeConfig {
    std::size_t max_depth = 20;
    std::size_t min_leaf = 2;
};

// Greedy gain-ratio induction with continuous splits at midpoints between
// sorted distinct values; ties broken by lowest feature index, then lowest
// threshold. Zero-gain-ratio splits are never taken.
IdsModel train_tree(const DatasetTable& data, const TreeConfig& cfg = {});

struct DnnConfig {
    std::size_t epochs = 100;
    std::vector<std::size_t> widths = {32, 16};
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::size_t batch_size = 128;
    double leaky_slope = 0.2;
};

// Softmax MLP trained with cross-entropy and Adam; deterministic per seed.
IdsModel train_dnn(const DatasetTable& data, const DnnConfig& cfg, std::uint64_t seed);

// Per-class scores, one row per input row in the model's class order:
// signed margins for the SVM, leaf frequencies for the tree, softmax
// probabilities for the DNN.
std::vector<double> predict_scores(const IdsModel& model, const double* rows, std::size_t n,
                                   std::size_t width);
std::vector<double> predict_scores(const IdsModel& model, const DatasetTable& table);

std::vector<ClassLabel> predict_labels(const IdsModel& model, const DatasetTable& table);

// Ranking score for "not normal": for the SVM the maximum attack-class
// margin minus the normal margin; for tree and DNN one minus the normal
// score. Requires Normal among the model's classes.
std::vector<double> anomaly_scores(const IdsModel& model, const DatasetTable& table);

void save_model(const IdsModel& model, const std::string& path);
IdsModel load_model(const std::string& path);

// CSV export: row id, true label, predicted label, one score per class.
void export_predictions_csv(const IdsModel& model, const DatasetTable& table,
                            const std::string& path);

}  // namespace ganids
