#include "ganids/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ganids {

// ---- confusion metrics ----

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ContractError("classification_metrics: empty confusion matrix");
    ClassificationMetrics m;
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp == 0) {
        m.precision_degenerate = true;
    } else {
        m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    }
    if (cm.tp + cm.fn == 0) {
        m.recall_degenerate = true;
    } else {
        m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    }
    if (m.precision + m.recall == 0.0) {
        m.f1_degenerate = true;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

ConfusionMatrix confusion_binary(const std::vector<ClassLabel>& truth,
                                 const std::vector<ClassLabel>& pred, ClassLabel positive) {
    if (truth.size() != pred.size()) throw ContractError("confusion_binary: size mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth[i] == positive;
        const bool p = pred[i] == positive;
        if (t && p) cm.tp++;
        else if (!t && !p) cm.tn++;
        else if (!t && p) cm.fp++;
        else cm.fn++;
    }
    return cm;
}

double multiclass_accuracy(const std::vector<ClassLabel>& truth,
                           const std::vector<ClassLabel>& pred) {
    if (truth.size() != pred.size() || truth.empty()) {
        throw ContractError("multiclass_accuracy: bad inputs");
    }
    std::size_t ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
    return static_cast<double>(ok) / static_cast<double>(truth.size());
}

double macro_f1(const std::vector<ClassLabel>& truth, const std::vector<ClassLabel>& pred,
                const std::vector<ClassLabel>& classes) {
    if (classes.empty()) throw ContractError("macro_f1: empty class list");
    double acc = 0.0;
    for (auto c : classes) {
        acc += classification_metrics(confusion_binary(truth, pred, c)).f1;
    }
    return acc / static_cast<double>(classes.size());
}

// ---- ROC ----

namespace {

void require_both_classes(const std::vector<int>& labels) {
    bool pos = false, neg = false;
    for (int l : labels) (l ? pos : neg) = true;
    if (!pos || !neg) throw ContractError("roc: both classes must be present");
}

}  // namespace

RocCurve RocCurve::build(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw ContractError("RocCurve: scores/labels mismatch");
    }
    require_both_classes(labels);
    std::size_t pos = 0;
    for (int l : labels) pos += l != 0;
    const std::size_t neg = labels.size() - pos;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve roc;
    roc.fpr.push_back(0.0);
    roc.tpr.push_back(0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // one curve point per distinct threshold; ties advance together
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]]) tp++;
            else fp++;
            ++i;
        }
        roc.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
        roc.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    }
    return roc;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw ContractError("auroc: scores/labels mismatch");
    }
    require_both_classes(labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    // average ranks over tie groups
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        i = j;
    }
    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k]) {
            pos_rank_sum += rank[k];
            pos++;
        }
    }
    const std::size_t neg = labels.size() - pos;
    const double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auroc_trapezoid(const RocCurve& roc) {
    double area = 0.0;
    for (std::size_t i = 1; i < roc.fpr.size(); ++i) {
        area += (roc.fpr[i] - roc.fpr[i - 1]) * 0.5 * (roc.tpr[i] + roc.tpr[i - 1]);
    }
    return area;
}

double tpr_at_fpr(const RocCurve& roc, double fpr_cap) {
    if (!(fpr_cap > 0.0 && fpr_cap < 1.0)) {
        throw ContractError("tpr_at_fpr: cap must be inside (0,1)");
    }
    double best = 0.0;
    for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
        if (roc.fpr[i] <= fpr_cap) {
            best = std::max(best, roc.tpr[i]);
        } else {
            // interpolate on the bracketing segment
            const double f0 = roc.fpr[i - 1], f1 = roc.fpr[i];
            const double t0 = roc.tpr[i - 1], t1 = roc.tpr[i];
            const double t = t0 + (t1 - t0) * (fpr_cap - f0) / (f1 - f0);
            best = std::max(best, t);
            break;
        }
    }
    return best;
}

// ---- JS divergence ----

HistogramDist HistogramDist::from_probs(std::vector<double> p, std::vector<double> q) {
    if (p.size() != q.size() || p.empty()) throw ContractError("HistogramDist: bin mismatch");
    auto check = [](const std::vector<double>& v, const char* name) {
        double sum = 0.0;
        for (double x : v) {
            if (x < 0.0) throw ContractError(std::string("HistogramDist: negative mass in ") + name);
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw ContractError(std::string("HistogramDist: ") + name + " does not sum to 1");
        }
    };
    check(p, "p");
    check(q, "q");
    HistogramDist h;
    h.edges.resize(p.size() + 1);
    for (std::size_t i = 0; i < h.edges.size(); ++i) h.edges[i] = static_cast<double>(i);
    h.p = std::move(p);
    h.q = std::move(q);
    return h;
}

HistogramDist HistogramDist::from_samples(const std::vector<double>& x,
                                          const std::vector<double>& y, std::size_t bins,
                                          double lo, double hi) {
    if (bins == 0 || !(hi > lo)) throw ContractError("HistogramDist: bad binning");
    if (x.empty() || y.empty()) throw ContractError("HistogramDist: empty sample");
    HistogramDist h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.p.assign(bins, 0.0);
    h.q.assign(bins, 0.0);
    auto drop = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (double s : v) {
            double t = (s - lo) / (hi - lo) * static_cast<double>(bins);
            auto b = static_cast<std::ptrdiff_t>(std::floor(t));
            b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
            out[static_cast<std::size_t>(b)] += 1.0;
        }
        for (double& c : out) c /= static_cast<double>(v.size());
    };
    drop(x, h.p);
    drop(y, h.q);
    return h;
}

double js_divergence(const HistogramDist& h) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.p.size(); ++i) {
        const double m = 0.5 * (h.p[i] + h.q[i]);
        if (h.p[i] > 0.0) acc += 0.5 * h.p[i] * std::log(h.p[i] / m);
        if (h.q[i] > 0.0) acc += 0.5 * h.q[i] * std::log(h.q[i] / m);
    }
    // exact arithmetic keeps this in [0, ln 2]; clamp away rounding dust
    return std::clamp(acc, 0.0, std::log(2.0));
}

double js_divergence_features(MatrixView x, MatrixView y, std::size_t bins) {
    if (x.cols != y.cols || x.cols == 0) throw ContractError("js_divergence_features: width");
    double acc = 0.0;
    std::vector<double> xa(x.rows), ya(y.rows);
    for (std::size_t c = 0; c < x.cols; ++c) {
        for (std::size_t r = 0; r < x.rows; ++r) xa[r] = x.data[r * x.cols + c];
        for (std::size_t r = 0; r < y.rows; ++r) ya[r] = y.data[r * y.cols + c];
        acc += js_divergence(HistogramDist::from_samples(xa, ya, bins, -1.0, 1.0));
    }
    return acc / static_cast<double>(x.cols);
}

// ---- MMD ----

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

double mmd2_unbiased(MatrixView x, MatrixView y, double bandwidth, double* raw) {
    if (bandwidth <= 0.0) throw ContractError("mmd2_unbiased: bandwidth must be positive");
    if (x.rows < 2 || y.rows < 2) throw ContractError("mmd2_unbiased: need at least 2 rows each");
    if (x.cols != y.cols) throw ContractError("mmd2_unbiased: width mismatch");
    const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    const std::size_t m = x.rows, n = y.rows, d = x.cols;

    // Kernel values are summed in sorted order so the estimate is
    // bit-identical under any row permutation.
    auto sorted_sum = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        double acc = 0.0;
        for (double t : v) acc += t;
        return acc;
    };

    std::vector<double> kxx;
    kxx.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            kxx.push_back(std::exp(-gamma * sq_dist(x.data + i * d, x.data + j * d, d)));
    std::vector<double> kyy;
    kyy.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            kyy.push_back(std::exp(-gamma * sq_dist(y.data + i * d, y.data + j * d, d)));
    std::vector<double> kxy;
    kxy.reserve(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            kxy.push_back(std::exp(-gamma * sq_dist(x.data + i * d, y.data + j * d, d)));
    const double xx = sorted_sum(kxx);
    const double yy = sorted_sum(kyy);
    const double xy = sorted_sum(kxy);

    const double est = 2.0 * xx / (static_cast<double>(m) * static_cast<double>(m - 1)) +
                       2.0 * yy / (static_cast<double>(n) * static_cast<double>(n - 1)) -
                       2.0 * xy / (static_cast<double>(m) * static_cast<double>(n));
    if (raw) *raw = est;
    return std::max(est, 0.0);
}

double median_heuristic_bandwidth(MatrixView x, MatrixView y, std::size_t cap) {
    if (x.cols != y.cols) throw ContractError("median_heuristic_bandwidth: width mismatch");
    std::vector<const double*> rows;
    for (std::size_t i = 0; i < x.rows && rows.size() < cap; ++i) rows.push_back(x.data + i * x.cols);
    for (std::size_t i = 0; i < y.rows && rows.size() < cap; ++i) rows.push_back(y.data + i * y.cols);
    if (rows.size() < 2) throw ContractError("median_heuristic_bandwidth: too few rows");
    std::vector<double> dists;
    dists.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j)
            dists.push_back(std::sqrt(sq_dist(rows[i], rows[j], x.cols)));
    const double med = percentile(std::move(dists), 50.0);
    return med > 0.0 ? med : 1e-3;
}

// ---- kNN alignment ----

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ContractError("percentile: empty input");
    if (!(p >= 0.0 && p <= 100.0)) throw ContractError("percentile: p outside [0,100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) throw ContractError("mean_std: empty input");
    MeanStd ms;
    for (double v : values) ms.mean += v;
    ms.mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - ms.mean) * (v - ms.mean);
    ms.stddev = std::sqrt(acc / static_cast<double>(values.size()));
    return ms;
}

AlignmentReport knn_alignment(MatrixView synthetic, MatrixView real, const EpsMode& eps_mode) {
    if (synthetic.rows == 0 || real.rows == 0) throw ContractError("knn_alignment: empty input");
    if (synthetic.cols != real.cols) throw ContractError("knn_alignment: width mismatch");
    const std::size_t d = synthetic.cols;

    std::vector<double> nn(synthetic.rows);
    for (std::size_t i = 0; i < synthetic.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < real.rows; ++j) {
            best = std::min(best, sq_dist(synthetic.data + i * d, real.data + j * d, d));
        }
        nn[i] = std::sqrt(best);
    }

    AlignmentReport rep;
    rep.knn_p50 = percentile(nn, 50.0);
    rep.knn_p95 = percentile(nn, 95.0);

    if (eps_mode.adaptive) {
        if (real.rows >= 2) {
            std::vector<double> rr(real.rows);
            for (std::size_t i = 0; i < real.rows; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < real.rows; ++j) {
                    if (i == j) continue;
                    best = std::min(best, sq_dist(real.data + i * d, real.data + j * d, d));
                }
                rr[i] = std::sqrt(best);
            }
            rep.eps = eps_mode.scale * percentile(rr, 50.0);
        } else {
            rep.eps = 0.0;
        }
    } else {
        rep.eps = eps_mode.fixed_eps;
    }
    std::size_t inside = 0;
    for (double v : nn) inside += v <= rep.eps;
    rep.frac_lt_eps = static_cast<double>(inside) / static_cast<double>(synthetic.rows);

    if (synthetic.rows >= 2 && real.rows >= 2) {
        const double bw = median_heuristic_bandwidth(synthetic, real);
        rep.mmd2 = mmd2_unbiased(synthetic, real, bw, &rep.mmd2_raw);
    }
    return rep;
}

}  // namespace ganids
