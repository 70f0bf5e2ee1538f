#include "ganids/ids.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace ganids {

using nlohmann::json;

std::string ids_kind_name(IdsKind k) {
    switch (k) {
        case IdsKind::Svm: return "svm";
        case IdsKind::Dt: return "dt";
        case IdsKind::Dnn: return "dnn";
    }
    throw ConfigError("unknown ids kind");
}

IdsKind ids_kind_from(const std::string& s) {
    if (s == "svm") return IdsKind::Svm;
    if (s == "dt") return IdsKind::Dt;
    if (s == "dnn") return IdsKind::Dnn;
    throw ConfigError("unknown ids kind '" + s + "'");
}

namespace {

std::vector<ClassLabel> class_list(const DatasetTable& data) {
    std::set<ClassLabel> s(data.labels.begin(), data.labels.end());
    return {s.begin(), s.end()};
}

std::size_t class_index(const std::vector<ClassLabel>& classes, ClassLabel l) {
    auto it = std::find(classes.begin(), classes.end(), l);
    if (it == classes.end()) throw ContractError("class not in model class list");
    return static_cast<std::size_t>(it - classes.begin());
}

}  // namespace

// ---- SVM ----

IdsModel train_svm(const DatasetTable& data, const SvmConfig& cfg) {
    data.validate();
    IdsModel model;
    model.kind = IdsKind::Svm;
    model.classes = class_list(data);
    model.input_width = data.width;
    if (model.classes.size() < 2) throw ContractError("train_svm: single-class data");

    const std::size_t n = data.rows(), d = data.width;
    model.svm.weights.assign(model.classes.size(), std::vector<double>(d, 0.0));
    model.svm.bias.assign(model.classes.size(), 0.0);

    // One-vs-rest hinge loss, full-batch subgradient:
    //   min (c/2)||w||^2 + (1/n) sum max(0, 1 - y(w.x+b)),  eta_t = 1/(c*t)
    for (std::size_t ci = 0; ci < model.classes.size(); ++ci) {
        auto& w = model.svm.weights[ci];
        double& b = model.svm.bias[ci];
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = data.labels[i] == model.classes[ci] ? 1.0 : -1.0;

        std::vector<double> gw(d);
        for (std::size_t t = 1; t <= cfg.iterations; ++t) {
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* x = data.features.data() + i * d;
                double m = b;
                for (std::size_t j = 0; j < d; ++j) m += w[j] * x[j];
                if (y[i] * m < 1.0) {
                    for (std::size_t j = 0; j < d; ++j) gw[j] -= y[i] * x[j];
                    gb -= y[i];
                }
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            const double eta = 1.0 / (cfg.c_reg * static_cast<double>(t));
            for (std::size_t j = 0; j < d; ++j) {
                w[j] -= eta * (cfg.c_reg * w[j] + gw[j] * inv_n);
            }
            b -= eta * gb * inv_n;
        }
    }
    return model;
}

// ---- decision tree ----

namespace {

double entropy(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain_ratio = 0.0;
};

struct TreeBuilder {
    const DatasetTable& data;
    const TreeConfig& cfg;
    std::vector<ClassLabel> classes;
    std::vector<std::size_t> label_idx;  // per row, index into classes
    std::vector<TreeNode> nodes;

    TreeBuilder(const DatasetTable& d, const TreeConfig& c) : data(d), cfg(c) {
        classes = class_list(d);
        label_idx.resize(d.rows());
        for (std::size_t i = 0; i < d.rows(); ++i) {
            label_idx[i] = class_index(classes, d.labels[i]);
        }
    }

    int make_leaf(const std::vector<std::size_t>& rows) {
        std::vector<std::size_t> counts(classes.size(), 0);
        for (auto r : rows) counts[label_idx[r]]++;
        TreeNode leaf;
        leaf.class_dist.resize(classes.size());
        for (std::size_t c = 0; c < classes.size(); ++c) {
            leaf.class_dist[c] = static_cast<double>(counts[c]) / static_cast<double>(rows.size());
        }
        nodes.push_back(std::move(leaf));
        return static_cast<int>(nodes.size() - 1);
    }

    SplitChoice best_split(const std::vector<std::size_t>& rows) {
        SplitChoice best;
        std::vector<std::size_t> total_counts(classes.size(), 0);
        for (auto r : rows) total_counts[label_idx[r]]++;
        const double h_parent = entropy(total_counts, rows.size());
        if (h_parent == 0.0) return best;  // pure

        const std::size_t n = rows.size();
        std::vector<std::pair<double, std::size_t>> vals(n);  // (value, class)
        for (std::size_t f = 0; f < data.width; ++f) {
            for (std::size_t i = 0; i < n; ++i) {
                vals[i] = {data.features[rows[i] * data.width + f], label_idx[rows[i]]};
            }
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            std::vector<std::size_t> left_counts(classes.size(), 0);
            std::size_t n_left = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_counts[vals[i].second]++;
                n_left++;
                if (vals[i].first == vals[i + 1].first) continue;  // midpoints only
                if (n_left < cfg.min_leaf || n - n_left < cfg.min_leaf) continue;

                std::vector<std::size_t> right_counts(classes.size());
                for (std::size_t c = 0; c < classes.size(); ++c) {
                    right_counts[c] = total_counts[c] - left_counts[c];
                }
                const double pl = static_cast<double>(n_left) / static_cast<double>(n);
                const double pr = 1.0 - pl;
                const double gain = h_parent - pl * entropy(left_counts, n_left) -
                                    pr * entropy(right_counts, n - n_left);
                if (gain <= 1e-12) continue;
                const double split_info = -(pl * std::log(pl) + pr * std::log(pr));
                if (split_info <= 0.0) continue;
                const double ratio = gain / split_info;
                const double threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                // strict improvement keeps the lowest (feature, threshold) on ties
                if (ratio > best.gain_ratio + 1e-15) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = threshold;
                    best.gain_ratio = ratio;
                }
            }
        }
        return best;
    }

    int build(const std::vector<std::size_t>& rows, std::size_t depth) {
        if (depth >= cfg.max_depth || rows.size() < 2 * cfg.min_leaf) return make_leaf(rows);
        SplitChoice s = best_split(rows);
        if (!s.found) return make_leaf(rows);

        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows) {
            if (data.features[r * data.width + s.feature] <= s.threshold) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        TreeNode node;
        node.feature = static_cast<int>(s.feature);
        node.threshold = s.threshold;
        nodes.push_back(std::move(node));
        const int idx = static_cast<int>(nodes.size() - 1);
        const int l = build(left_rows, depth + 1);
        const int r = build(right_rows, depth + 1);
        nodes[idx].left = l;
        nodes[idx].right = r;
        return idx;
    }
};

}  // namespace

IdsModel train_tree(const DatasetTable& data, const TreeConfig& cfg) {
    data.validate();
    IdsModel model;
    model.kind = IdsKind::Dt;
    model.classes = class_list(data);
    model.input_width = data.width;

    TreeBuilder builder(data, cfg);
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), 0);
    builder.build(rows, 0);  // root lands at index 0
    model.tree.nodes = std::move(builder.nodes);
    return model;
}

// ---- DNN ----

namespace {

NetworkSpec dnn_spec(std::size_t in, std::size_t out, const DnnConfig& cfg) {
    NetworkSpec s;
    s.input_dim = in;
    for (std::size_t w : cfg.widths) {
        s.dense(w);
        s.activation(Act::LeakyRelu, cfg.leaky_slope);
    }
    s.dense(out);
    return s;
}

// Stable cross-entropy from logits against one-hot targets.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets,
                     std::size_t n_classes) {
    const std::size_t m = logits.rows();
    Tensor shifted = sub(logits, broadcast_col(rowmax_detached(logits), n_classes));
    Tensor lse = log(sum_rows(exp(shifted)));  // [m,1]
    Tensor logp = sub(shifted, broadcast_col(lse, n_classes));
    std::vector<double> onehot(m * n_classes, 0.0);
    for (std::size_t i = 0; i < m; ++i) onehot[i * n_classes + targets[i]] = 1.0;
    Tensor mask = Tensor::leaf({m, n_classes}, std::move(onehot), false);
    return mul_scalar(sum(mul(logp, mask)), -1.0 / static_cast<double>(m));
}

}  // namespace

IdsModel train_dnn(const DatasetTable& data, const DnnConfig& cfg, std::uint64_t seed) {
    data.validate();
    IdsModel model;
    model.kind = IdsKind::Dnn;
    model.classes = class_list(data);
    model.input_width = data.width;
    model.seed = seed;
    const std::size_t k = model.classes.size();
    model.dnn = build_network(dnn_spec(data.width, k, cfg), seed);

    std::vector<std::size_t> targets(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        targets[i] = class_index(model.classes, data.labels[i]);
    }

    auto params = model.dnn.parameters();
    AdamState adam;
    Rng shuffle_rng(derive_seed(seed, 0x6964736e));
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t m = std::min(cfg.batch_size, order.size() - start);
            std::vector<double> xb(m * data.width);
            std::vector<std::size_t> yb(m);
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t r = order[start + i];
                std::copy(data.features.begin() + r * data.width,
                          data.features.begin() + (r + 1) * data.width,
                          xb.begin() + i * data.width);
                yb[i] = targets[r];
            }
            Tensor x = Tensor::leaf({m, data.width}, std::move(xb), false);
            Tensor logits = model.dnn.forward(x, ForwardMode::Train);
            Tensor loss = cross_entropy(logits, yb, k);
            auto gts = gradients(loss, params);
            std::vector<std::vector<double>> grads;
            grads.reserve(gts.size());
            for (auto& g : gts) grads.push_back(g.values());
            adam_step(params, grads, adam, cfg.lr, cfg.beta1, cfg.beta2);
        }
    }
    return model;
}

// ---- prediction ----

std::vector<double> predict_scores(const IdsModel& model, const double* rows, std::size_t n,
                                   std::size_t width) {
    if (width != model.input_width) {
        throw ContractError("predict_scores: row width " + std::to_string(width) +
                            " does not match model width " + std::to_string(model.input_width));
    }
    const std::size_t k = model.classes.size();
    std::vector<double> out(n * k, 0.0);
    switch (model.kind) {
        case IdsKind::Svm:
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < k; ++c) {
                    double m = model.svm.bias[c];
                    const auto& w = model.svm.weights[c];
                    for (std::size_t j = 0; j < width; ++j) m += w[j] * rows[i * width + j];
                    out[i * k + c] = m;
                }
            }
            break;
        case IdsKind::Dt:
            for (std::size_t i = 0; i < n; ++i) {
                const TreeNode* node = &model.tree.nodes[0];
                while (node->feature >= 0) {
                    const double v = rows[i * width + static_cast<std::size_t>(node->feature)];
                    node = &model.tree.nodes[static_cast<std::size_t>(
                        v <= node->threshold ? node->left : node->right)];
                }
                std::copy(node->class_dist.begin(), node->class_dist.end(), out.begin() + i * k);
            }
            break;
        case IdsKind::Dnn: {
            NoGradGuard guard;
            Network net = model.dnn;  // parameters shared; forward is const-safe without BN
            Tensor x = Tensor::leaf({n, width}, std::vector<double>(rows, rows + n * width), false);
            Tensor probs = softmax_rows(net.forward(x, ForwardMode::Eval));
            out = probs.values();
            break;
        }
    }
    return out;
}

std::vector<double> predict_scores(const IdsModel& model, const DatasetTable& table) {
    return predict_scores(model, table.features.data(), table.rows(), table.width);
}

std::vector<ClassLabel> predict_labels(const IdsModel& model, const DatasetTable& table) {
    auto scores = predict_scores(model, table);
    const std::size_t k = model.classes.size();
    std::vector<ClassLabel> out(table.rows());
    for (std::size_t i = 0; i < table.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c) {
            if (scores[i * k + c] > scores[i * k + best]) best = c;
        }
        out[i] = model.classes[best];
    }
    return out;
}

std::vector<double> anomaly_scores(const IdsModel& model, const DatasetTable& table) {
    const std::size_t normal = class_index(model.classes, ClassLabel::Normal);
    auto scores = predict_scores(model, table);
    const std::size_t k = model.classes.size();
    std::vector<double> out(table.rows());
    for (std::size_t i = 0; i < table.rows(); ++i) {
        if (model.kind == IdsKind::Svm) {
            double best_attack = -1e300;
            for (std::size_t c = 0; c < k; ++c) {
                if (c == normal) continue;
                best_attack = std::max(best_attack, scores[i * k + c]);
            }
            out[i] = best_attack - scores[i * k + normal];
        } else {
            out[i] = 1.0 - scores[i * k + normal];
        }
    }
    return out;
}

// ---- persistence ----

namespace {

std::string hexd(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double unhexd(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

json doubles_to_json(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(hexd(x));
    return a;
}

std::vector<double> doubles_from_json(const json& a) {
    std::vector<double> v;
    v.reserve(a.size());
    for (const auto& s : a) v.push_back(unhexd(s.get<std::string>()));
    return v;
}

}  // namespace

void save_model(const IdsModel& model, const std::string& path) {
    json j;
    j["version"] = 1;
    j["kind"] = ids_kind_name(model.kind);
    j["input_width"] = model.input_width;
    j["seed"] = model.seed;
    j["classes"] = json::array();
    for (auto c : model.classes) j["classes"].push_back(label_name(c));
    switch (model.kind) {
        case IdsKind::Svm: {
            json w = json::array();
            for (const auto& row : model.svm.weights) w.push_back(doubles_to_json(row));
            j["weights"] = w;
            j["bias"] = doubles_to_json(model.svm.bias);
            break;
        }
        case IdsKind::Dt: {
            json nodes = json::array();
            for (const auto& n : model.tree.nodes) {
                json jn;
                jn["feature"] = n.feature;
                jn["threshold"] = hexd(n.threshold);
                jn["left"] = n.left;
                jn["right"] = n.right;
                jn["dist"] = doubles_to_json(n.class_dist);
                nodes.push_back(jn);
            }
            j["nodes"] = nodes;
            break;
        }
        case IdsKind::Dnn: {
            j["spec"] = json::parse(model.dnn.spec().to_json());
            std::vector<double> params;
            for (const auto& p : model.dnn.parameters()) {
                params.insert(params.end(), p.values().begin(), p.values().end());
            }
            j["params"] = doubles_to_json(params);
            j["buffers"] = doubles_to_json(model.dnn.buffers_flat());
            break;
        }
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("save_model: cannot open " + path);
    f << j.dump() << "\n";
    if (!f) throw IoError("save_model: write failed for " + path);
}

IdsModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("load_model: cannot open " + path);
    json j = json::parse(f, nullptr, true);
    if (j.at("version").get<int>() != 1) throw IoError("load_model: unsupported version");

    IdsModel model;
    model.kind = ids_kind_from(j.at("kind").get<std::string>());
    model.input_width = j.at("input_width").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("classes")) model.classes.push_back(label_from(c.get<std::string>()));

    switch (model.kind) {
        case IdsKind::Svm:
            for (const auto& row : j.at("weights")) {
                model.svm.weights.push_back(doubles_from_json(row));
            }
            model.svm.bias = doubles_from_json(j.at("bias"));
            break;
        case IdsKind::Dt:
            for (const auto& jn : j.at("nodes")) {
                TreeNode n;
                n.feature = jn.at("feature").get<int>();
                n.threshold = unhexd(jn.at("threshold").get<std::string>());
                n.left = jn.at("left").get<int>();
                n.right = jn.at("right").get<int>();
                n.class_dist = doubles_from_json(jn.at("dist"));
                model.tree.nodes.push_back(std::move(n));
            }
            break;
        case IdsKind::Dnn: {
            NetworkSpec spec = NetworkSpec::from_json(j.at("spec").dump());
            model.dnn = build_network(spec, 0);
            auto params = doubles_from_json(j.at("params"));
            std::size_t pos = 0;
            for (auto& p : model.dnn.parameters()) {
                if (pos + p.size() > params.size()) throw IoError("load_model: parameter underrun");
                p.set_values({params.begin() + pos, params.begin() + pos + p.size()});
                pos += p.size();
            }
            if (pos != params.size()) throw IoError("load_model: parameter count mismatch");
            model.dnn.set_buffers_flat(doubles_from_json(j.at("buffers")));
            break;
        }
    }
    return model;
}

void export_predictions_csv(const IdsModel& model, const DatasetTable& table,
                            const std::string& path) {
    auto scores = predict_scores(model, table);
    auto labels = predict_labels(model, table);
    const std::size_t k = model.classes.size();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("export_predictions_csv: cannot open " + path);
    f << "row,true,predicted";
    for (auto c : model.classes) f << ",score_" << label_name(c);
    f << "\n";
    char buf[64];
    for (std::size_t i = 0; i < table.rows(); ++i) {
        f << i << "," << label_name(table.labels[i]) << "," << label_name(labels[i]);
        for (std::size_t c = 0; c < k; ++c) {
            std::snprintf(buf, sizeof buf, ",%.17g", scores[i * k + c]);
            f << buf;
        }
        f << "\n";
    }
    if (!f) throw IoError("export_predictions_csv: write failed for " + path);
}

}  // namespace ganids
