#pragma once

#include <cstddef>
#include <vector>

#include "ganids/data.hpp"
#include "ganids/errors.hpp"

namespace ganids {

// Read-only dense matrix view.
struct MatrixView {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

inline MatrixView view_of(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    return MatrixView{v.data(), rows, cols};
}

// ---- confusion metrics ----

struct ConfusionMatrix {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t total() const { return tp + tn + fp + fn; }
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // zero-denominator cases are reported as 0 with a flag, not thrown
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

ConfusionMatrix confusion_binary(const std::vector<ClassLabel>& truth,
                                 const std::vector<ClassLabel>& pred, ClassLabel positive);

double multiclass_accuracy(const std::vector<ClassLabel>& truth,
                           const std::vector<ClassLabel>& pred);

// Unweighted mean of per-class one-vs-rest F1 over `classes`.
double macro_f1(const std::vector<ClassLabel>& truth, const std::vector<ClassLabel>& pred,
                const std::vector<ClassLabel>& classes);

// ---- ROC ----

// Threshold-swept curve: one point per distinct score, endpoints (0,0) and
// (1,1); fpr and tpr are nondecreasing.
struct RocCurve {
    std::vector<double> fpr;
    std::vector<double> tpr;

    static RocCurve build(const std::vector<double>& scores, const std::vector<int>& labels);
};

// Mann-Whitney rank statistic with ties counted one half.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Trapezoidal area under the curve; agrees with auroc() to 1e-12.
double auroc_trapezoid(const RocCurve& roc);

// Maximum TPR at FPR <= cap, linearly interpolated between bracketing curve
// points when none sits exactly at the cap.
double tpr_at_fpr(const RocCurve& roc, double fpr_cap = 0.05);

// ---- Jensen-Shannon divergence on binned distributions ----

struct HistogramDist {
    std::vector<double> edges;  // shared bin edges, size bins+1
    std::vector<double> p;      // per-bin probabilities, sum 1
    std::vector<double> q;

    static HistogramDist from_probs(std::vector<double> p, std::vector<double> q);
    static HistogramDist from_samples(const std::vector<double>& x, const std::vector<double>& y,
                                      std::size_t bins, double lo, double hi);
};

// Natural-log JS divergence with 0*log(0) = 0; always in [0, ln 2].
double js_divergence(const HistogramDist& h);

// Diagnostic: per-feature binned JS over [-1,1], averaged across features.
double js_divergence_features(MatrixView x, MatrixView y, std::size_t bins = 64);

// ---- MMD ----

// Unbiased U-statistic with k(a,b) = exp(-||a-b||^2 / (2 bandwidth^2)).
// Negative estimates are clipped to 0; the raw value is retained via out-arg.
double mmd2_unbiased(MatrixView x, MatrixView y, double bandwidth, double* raw = nullptr);

// Median pairwise distance over the pooled sample, capped at `cap` rows.
double median_heuristic_bandwidth(MatrixView x, MatrixView y, std::size_t cap = 2000);

// ---- kNN alignment ----

struct EpsMode {
    bool adaptive = true;   // eps = scale * median real-real NN distance
    double scale = 1e-3;
    double fixed_eps = 0.0;  // used when adaptive is false
};

struct AlignmentReport {
    double knn_p50 = 0.0;
    double knn_p95 = 0.0;
    double mmd2 = 0.0;      // clipped at 0
    double mmd2_raw = 0.0;  // pre-clip estimate
    double frac_lt_eps = 0.0;
    double eps = 0.0;
};

// Nearest-real-neighbor distance per synthetic row: 50th/95th percentiles
// (linear interpolation between closest ranks) and the fraction within eps.
// The MMD fields are filled with the median-heuristic bandwidth.
AlignmentReport knn_alignment(MatrixView synthetic, MatrixView real, const EpsMode& eps_mode = {});

// Linear-interpolation percentile (p in [0,100]) of unsorted values.
double percentile(std::vector<double> values, double p);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // population
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace ganids
