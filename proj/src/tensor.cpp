#include "ganids/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ganids {

namespace {

std::atomic<std::uint64_t> g_seq{1};
thread_local bool g_grad_enabled = true;

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(op) + ": non-finite value produced");
        }
    }
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> values, const char* op) {
    if (shape_size(shape) != values.size()) {
        throw DimensionError(std::string(op) + ": shape/static size mismatch");
    }
    check_finite(values, op);
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return n;
}

// Attaches parents and a backward fn when grad mode is on and any parent
// needs a gradient; otherwise the result is a constant leaf.
Tensor finish(std::shared_ptr<TensorNode> n, std::vector<Tensor> parents,
              std::function<std::vector<Tensor>(const Tensor&, const Tensor&)> bw) {
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) {
            if (p.requires_grad()) {
                needs = true;
                break;
            }
        }
    }
    if (needs) {
        n->requires_grad = true;
        n->is_leaf = false;
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(bw);
    }
    return Tensor(std::move(n));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

void require_2d(const Tensor& a, const char* op) {
    if (a.shape().size() != 2) {
        throw DimensionError(std::string(op) + ": expected 2-D, got " + shape_str(a.shape()));
    }
}

}  // namespace

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set(bool on) { g_grad_enabled = on; }

// ---- Tensor basics ----

Tensor Tensor::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    auto n = make_node(std::move(shape), std::move(values), "leaf");
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(shape_size(shape), 0.0);
    return leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(shape_size(shape), value);
    return leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value) { return leaf({1}, {value}, false); }

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
    if (rows.empty()) throw DimensionError("Tensor::matrix: empty");
    const std::size_t m = rows.size(), n = rows[0].size();
    std::vector<double> v;
    v.reserve(m * n);
    for (const auto& r : rows) {
        if (r.size() != n) throw DimensionError("Tensor::matrix: ragged rows");
        v.insert(v.end(), r.begin(), r.end());
    }
    return leaf({m, n}, std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->values.size(); }

std::size_t Tensor::rows() const {
    require_2d(*this, "rows");
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    require_2d(*this, "cols");
    return node_->shape[1];
}

const std::vector<double>& Tensor::values() const { return node_->values; }

double Tensor::item() const {
    if (size() != 1) throw ContractError("Tensor::item: tensor has " + std::to_string(size()) + " elements");
    return node_->values[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->is_leaf; }

Tensor Tensor::detach() const {
    auto n = make_node(node_->shape, node_->values, "detach");
    return Tensor(std::move(n));
}

void Tensor::set_values(const std::vector<double>& v) {
    if (!node_->is_leaf) throw ContractError("set_values: not a leaf");
    if (v.size() != node_->values.size()) throw DimensionError("set_values: size mismatch");
    check_finite(v, "set_values");
    node_->values = v;
}

void Tensor::add_to_values(const std::vector<double>& delta) {
    if (!node_->is_leaf) throw ContractError("add_to_values: not a leaf");
    if (delta.size() != node_->values.size()) throw DimensionError("add_to_values: size mismatch");
    for (std::size_t i = 0; i < delta.size(); ++i) node_->values[i] += delta[i];
    check_finite(node_->values, "add_to_values");
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad_accum.empty()) throw ContractError("grad: no gradient accumulated");
    return node_->grad_accum;
}

bool Tensor::has_grad() const { return !node_->grad_accum.empty(); }

void Tensor::zero_grad() { node_->grad_accum.clear(); }

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
    return finish(make_node(a.shape(), std::move(v), "add"), {a, b},
                  [](const Tensor&, const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
    return finish(make_node(a.shape(), std::move(v), "sub"), {a, b},
                  [](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{g, neg(g)};
                  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
    return finish(make_node(a.shape(), std::move(v), "mul"), {a, b},
                  [a, b](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{mul(g, b), mul(g, a)};
                  });
}

Tensor neg(const Tensor& a) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = -av[i];
    return finish(make_node(a.shape(), std::move(v), "neg"), {a},
                  [](const Tensor&, const Tensor& g) { return std::vector<Tensor>{neg(g)}; });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + c;
    return finish(make_node(a.shape(), std::move(v), "add_scalar"), {a},
                  [](const Tensor&, const Tensor& g) { return std::vector<Tensor>{g}; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * c;
    return finish(make_node(a.shape(), std::move(v), "mul_scalar"), {a},
                  [c](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{mul_scalar(g, c)};
                  });
}

// ---- matmul family ----

namespace {

// C[m,n] += or = A[m,k]*B[k,n]; ikj order so the inner loop is contiguous.
void matmul_kernel(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
                   std::size_t n) {
    std::fill(C, C + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = a_row[p];
            if (a == 0.0) continue;
            const double* b_row = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    std::vector<double> v(m * n);
    matmul_kernel(a.values().data(), b.values().data(), v.data(), m, k, n);
    return finish(make_node({m, n}, std::move(v), "matmul"), {a, b},
                  [a, b](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{matmul(g, transpose(b)), matmul(transpose(a), g)};
                  });
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(m * n);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[j * m + i] = av[i * n + j];
    return finish(make_node({n, m}, std::move(v), "transpose"), {a},
                  [](const Tensor&, const Tensor& g) { return std::vector<Tensor>{transpose(g)}; });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 3 || b.shape().size() != 3) {
        throw DimensionError("bmm: expected 3-D operands");
    }
    const std::size_t B = a.shape()[0], m = a.shape()[1], k = a.shape()[2];
    if (b.shape()[0] != B || b.shape()[1] != k) {
        throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::size_t n = b.shape()[2];
    std::vector<double> v(B * m * n);
    for (std::size_t i = 0; i < B; ++i) {
        matmul_kernel(a.values().data() + i * m * k, b.values().data() + i * k * n,
                      v.data() + i * m * n, m, k, n);
    }
    return finish(make_node({B, m, n}, std::move(v), "bmm"), {a, b},
                  [a, b](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{bmm(g, transpose_last2(b)),
                                                 bmm(transpose_last2(a), g)};
                  });
}

Tensor transpose_last2(const Tensor& a) {
    if (a.shape().size() != 3) throw DimensionError("transpose_last2: expected 3-D");
    const std::size_t B = a.shape()[0], m = a.shape()[1], n = a.shape()[2];
    std::vector<double> v(B * m * n);
    const auto& av = a.values();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) v[b * m * n + j * m + i] = av[b * m * n + i * n + j];
    return finish(make_node({B, n, m}, std::move(v), "transpose_last2"), {a},
                  [](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{transpose_last2(g)};
                  });
}

// ---- shape & reduction ----

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw DimensionError("reshape: size mismatch " + shape_str(a.shape()) + " -> " +
                             shape_str(shape));
    }
    Shape orig = a.shape();
    return finish(make_node(std::move(shape), a.values(), "reshape"), {a},
                  [orig](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{reshape(g, orig)};
                  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    require_2d(x, "add_rowvec");
    if (b.shape().size() != 1 || b.shape()[0] != x.shape()[1]) {
        throw DimensionError("add_rowvec: bias shape " + shape_str(b.shape()) +
                             " does not match " + shape_str(x.shape()));
    }
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    std::vector<double> v(m * n);
    const auto& xv = x.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = xv[i * n + j] + bv[j];
    return finish(make_node({m, n}, std::move(v), "add_rowvec"), {x, b},
                  [](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{g, sum_cols(g)};
                  });
}

Tensor broadcast_col(const Tensor& c, std::size_t n) {
    const auto& s = c.shape();
    std::size_t m = 0;
    if (s.size() == 2 && s[1] == 1) m = s[0];
    else if (s.size() == 1) m = s[0];
    else throw DimensionError("broadcast_col: expected [m,1] or [m], got " + shape_str(s));
    std::vector<double> v(m * n);
    const auto& cv = c.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = cv[i];
    Shape orig = s;
    return finish(make_node({m, n}, std::move(v), "broadcast_col"), {c},
                  [orig](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{reshape(sum_rows(g), orig)};
                  });
}

Tensor broadcast_row(const Tensor& r, std::size_t m) {
    if (r.shape().size() != 1) throw DimensionError("broadcast_row: expected 1-D");
    const std::size_t n = r.shape()[0];
    std::vector<double> v(m * n);
    const auto& rv = r.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = rv[j];
    return finish(make_node({m, n}, std::move(v), "broadcast_row"), {r},
                  [](const Tensor&, const Tensor& g) { return std::vector<Tensor>{sum_cols(g)}; });
}

Tensor broadcast_to(const Tensor& s, Shape shape) {
    if (s.size() != 1) throw ContractError("broadcast_to: source must be scalar");
    std::vector<double> v(shape_size(shape), s.values()[0]);
    return finish(make_node(std::move(shape), std::move(v), "broadcast_to"), {s},
                  [](const Tensor&, const Tensor& g) { return std::vector<Tensor>{sum(g)}; });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double x : a.values()) acc += x;
    Shape orig = a.shape();
    return finish(make_node({1}, {acc}, "sum"), {a},
                  [orig](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{broadcast_to(g, orig)};
                  });
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ContractError("mean: empty tensor");
    return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_rows(const Tensor& a) {
    require_2d(a, "sum_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(m, 0.0);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += av[i * n + j];
        v[i] = acc;
    }
    return finish(make_node({m, 1}, std::move(v), "sum_rows"), {a},
                  [n](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{broadcast_col(g, n)};
                  });
}

Tensor sum_cols(const Tensor& a) {
    require_2d(a, "sum_cols");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(n, 0.0);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[j] += av[i * n + j];
    return finish(make_node({n}, std::move(v), "sum_cols"), {a},
                  [m](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{broadcast_row(g, m)};
                  });
}

// ---- nonlinearities ----

Tensor exp(const Tensor& a) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(av[i]);
    return finish(make_node(a.shape(), std::move(v), "exp"), {a},
                  [](const Tensor& out, const Tensor& g) {
                      return std::vector<Tensor>{mul(g, out)};
                  });
}

Tensor log(const Tensor& a) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(av[i]);
    return finish(make_node(a.shape(), std::move(v), "log"), {a},
                  [a](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{mul(g, reciprocal(a))};
                  });
}

Tensor sqrt(const Tensor& a) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(av[i]);
    return finish(make_node(a.shape(), std::move(v), "sqrt"), {a},
                  [](const Tensor& out, const Tensor& g) {
                      return std::vector<Tensor>{mul(g, mul_scalar(reciprocal(out), 0.5))};
                  });
}

Tensor reciprocal(const Tensor& a) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / av[i];
    return finish(make_node(a.shape(), std::move(v), "reciprocal"), {a},
                  [](const Tensor& out, const Tensor& g) {
                      return std::vector<Tensor>{neg(mul(g, mul(out, out)))};
                  });
}

Tensor tanh(const Tensor& a) {
    // Saturated values are pulled one ulp inside so outputs stay strictly
    // within (-1,1).
    static const double kOne = std::nextafter(1.0, 0.0);
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = std::clamp(std::tanh(av[i]), -kOne, kOne);
    }
    return finish(make_node(a.shape(), std::move(v), "tanh"), {a},
                  [](const Tensor& out, const Tensor& g) {
                      return std::vector<Tensor>{
                          mul(g, add_scalar(neg(mul(out, out)), 1.0))};
                  });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = av[i];
        if (x >= 0.0) {
            v[i] = 1.0 / (1.0 + std::exp(-x));
        } else {
            const double e = std::exp(x);
            v[i] = e / (1.0 + e);
        }
    }
    return finish(make_node(a.shape(), std::move(v), "sigmoid"), {a},
                  [](const Tensor& out, const Tensor& g) {
                      return std::vector<Tensor>{
                          mul(g, mul(out, add_scalar(neg(out), 1.0)))};
                  });
}

Tensor softplus(const Tensor& a) {
    std::vector<double> v(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = av[i];
        v[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
    return finish(make_node(a.shape(), std::move(v), "softplus"), {a},
                  [a](const Tensor&, const Tensor& g) {
                      return std::vector<Tensor>{mul(g, sigmoid(a))};
                  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw ContractError("leaky_relu: slope must be in (0,1)");
    std::vector<double> v(a.size());
    std::vector<double> mask(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool pos = av[i] >= 0.0;
        mask[i] = pos ? 1.0 : slope;
        v[i] = av[i] * mask[i];
    }
    Shape shp = a.shape();
    return finish(make_node(a.shape(), std::move(v), "leaky_relu"), {a},
                  [mask = std::move(mask), shp](const Tensor&, const Tensor& g) {
                      Tensor m = Tensor::leaf(shp, mask, false);
                      return std::vector<Tensor>{mul(g, m)};
                  });
}

Tensor softmax_rows(const Tensor& a) {
    require_2d(a, "softmax_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(m * n);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        double mx = av[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, av[i * n + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            v[i * n + j] = std::exp(av[i * n + j] - mx);
            denom += v[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] /= denom;
    }
    return finish(make_node({m, n}, std::move(v), "softmax_rows"), {a},
                  [n](const Tensor& out, const Tensor& g) {
                      // dx = (g - rowsum(g*y)) * y
                      Tensor gy = mul(g, out);
                      Tensor rs = broadcast_col(sum_rows(gy), n);
                      return std::vector<Tensor>{mul(sub(g, rs), out)};
                  });
}

Tensor rowmax_detached(const Tensor& a) {
    require_2d(a, "rowmax_detached");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(m);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        double mx = av[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, av[i * n + j]);
        v[i] = mx;
    }
    return Tensor::leaf({m, 1}, std::move(v), false);
}

// ---- autodiff ----

namespace {

// Reachable requires-grad subgraph in decreasing creation order.
std::vector<std::shared_ptr<TensorNode>> topo_from(const std::shared_ptr<TensorNode>& root) {
    std::vector<std::shared_ptr<TensorNode>> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::shared_ptr<TensorNode>> stack{root};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        }
    }
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a->seq > b->seq; });
    return order;
}

std::unordered_map<TensorNode*, Tensor> run_backward(const Tensor& loss, bool create_graph) {
    if (loss.size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss does not require grad");
    }
    std::unordered_map<TensorNode*, Tensor> grads;
    grads.emplace(loss.node().get(), Tensor::full(loss.shape(), 1.0));

    auto order = topo_from(loss.node());
    // Grad formulas only build new graph edges when asked to.
    std::unique_ptr<NoGradGuard> guard;
    if (!create_graph) guard = std::make_unique<NoGradGuard>();

    for (const auto& n : order) {
        if (n->parents.empty()) continue;
        auto it = grads.find(n.get());
        if (it == grads.end()) continue;
        Tensor self(n);
        std::vector<Tensor> pgrads = n->backward(self, it->second);
        if (pgrads.size() != n->parents.size()) {
            throw ContractError("backward: op returned wrong parent-grad count");
        }
        for (std::size_t i = 0; i < n->parents.size(); ++i) {
            const auto& p = n->parents[i];
            if (!p->requires_grad) continue;
            auto pit = grads.find(p.get());
            if (pit == grads.end()) {
                grads.emplace(p.get(), pgrads[i]);
            } else {
                pit->second = add(pit->second, pgrads[i]);
            }
        }
    }
    return grads;
}

}  // namespace

void backward(const Tensor& loss) {
    auto grads = run_backward(loss, /*create_graph=*/false);
    auto order = topo_from(loss.node());
    for (const auto& n : order) {
        if (!n->is_leaf || !n->requires_grad) continue;
        auto it = grads.find(n.get());
        if (it == grads.end()) continue;
        const auto& gv = it->second.values();
        if (n->grad_accum.empty()) n->grad_accum.assign(n->values.size(), 0.0);
        for (std::size_t i = 0; i < gv.size(); ++i) n->grad_accum[i] += gv[i];
    }
}

std::vector<Tensor> gradients(const Tensor& loss, const std::vector<Tensor>& wrt,
                              bool create_graph) {
    auto grads = run_backward(loss, create_graph);
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        auto it = grads.find(w.node().get());
        if (it == grads.end()) {
            out.push_back(Tensor::zeros(w.shape()));
        } else {
            out.push_back(it->second);
        }
    }
    return out;
}

Tensor grad_of_output_wrt_input(const std::function<Tensor(const Tensor&)>& net, const Tensor& x) {
    if (!x.requires_grad()) {
        throw ContractError("grad_of_output_wrt_input: input must require grad");
    }
    Tensor y = net(x);
    if (y.size() != 1) {
        throw ContractError("grad_of_output_wrt_input: net output must be scalar");
    }
    return gradients(y, {x}, /*create_graph=*/true)[0];
}

}  // namespace ganids
