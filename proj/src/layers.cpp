#include "ganids/layers.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace ganids {

using nlohmann::json;

// ---- NetworkSpec ----

NetworkSpec& NetworkSpec::dense(std::size_t width) {
    layers.push_back({LayerDesc::Kind::Dense, width, Act::None, 0.2, 16, 0.0});
    return *this;
}

NetworkSpec& NetworkSpec::attention(std::size_t d_k) {
    LayerDesc d;
    d.kind = LayerDesc::Kind::SelfAttention;
    d.d_k = d_k;
    layers.push_back(d);
    return *this;
}

NetworkSpec& NetworkSpec::batchnorm() {
    LayerDesc d;
    d.kind = LayerDesc::Kind::BatchNorm;
    layers.push_back(d);
    return *this;
}

NetworkSpec& NetworkSpec::activation(Act a, double slope) {
    LayerDesc d;
    d.kind = LayerDesc::Kind::Activation;
    d.act = a;
    d.slope = slope;
    layers.push_back(d);
    return *this;
}

NetworkSpec& NetworkSpec::dropout(double rate) {
    LayerDesc d;
    d.kind = LayerDesc::Kind::Dropout;
    d.rate = rate;
    layers.push_back(d);
    return *this;
}

std::size_t NetworkSpec::output_dim() const {
    std::size_t w = input_dim;
    for (const auto& l : layers) {
        if (l.kind == LayerDesc::Kind::Dense) w = l.width;
    }
    return w;
}

void NetworkSpec::validate() const {
    if (input_dim == 0) throw ConfigError("NetworkSpec: input_dim must be positive");
    std::size_t w = input_dim;
    for (const auto& l : layers) {
        switch (l.kind) {
            case LayerDesc::Kind::Dense:
                if (l.width == 0) throw ConfigError("NetworkSpec: dense width must be positive");
                w = l.width;
                break;
            case LayerDesc::Kind::SelfAttention:
                if (l.d_k == 0) throw ConfigError("NetworkSpec: attention d_k must be positive");
                if (w == 0) throw ConfigError("NetworkSpec: attention before any width");
                break;
            case LayerDesc::Kind::Activation:
                if (l.act == Act::LeakyRelu && !(l.slope > 0.0 && l.slope < 1.0))
                    throw ConfigError("NetworkSpec: leaky slope must be in (0,1)");
                break;
            case LayerDesc::Kind::Dropout:
                if (l.rate < 0.0 || l.rate >= 1.0)
                    throw ConfigError("NetworkSpec: dropout rate must be in [0,1)");
                break;
            case LayerDesc::Kind::BatchNorm:
                break;
        }
    }
}

namespace {

std::string kind_name(LayerDesc::Kind k) {
    switch (k) {
        case LayerDesc::Kind::Dense: return "dense";
        case LayerDesc::Kind::SelfAttention: return "attention";
        case LayerDesc::Kind::BatchNorm: return "batchnorm";
        case LayerDesc::Kind::Activation: return "activation";
        case LayerDesc::Kind::Dropout: return "dropout";
    }
    throw ConfigError("unknown layer kind");
}

LayerDesc::Kind kind_from(const std::string& s) {
    if (s == "dense") return LayerDesc::Kind::Dense;
    if (s == "attention") return LayerDesc::Kind::SelfAttention;
    if (s == "batchnorm") return LayerDesc::Kind::BatchNorm;
    if (s == "activation") return LayerDesc::Kind::Activation;
    if (s == "dropout") return LayerDesc::Kind::Dropout;
    throw ConfigError("unknown layer kind '" + s + "'");
}

std::string act_name(Act a) {
    switch (a) {
        case Act::None: return "none";
        case Act::LeakyRelu: return "leaky_relu";
        case Act::Tanh: return "tanh";
        case Act::Sigmoid: return "sigmoid";
    }
    throw ConfigError("unknown activation");
}

Act act_from(const std::string& s) {
    if (s == "none") return Act::None;
    if (s == "leaky_relu") return Act::LeakyRelu;
    if (s == "tanh") return Act::Tanh;
    if (s == "sigmoid") return Act::Sigmoid;
    throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

std::string NetworkSpec::to_json() const {
    json j;
    j["input_dim"] = input_dim;
    j["layers"] = json::array();
    for (const auto& l : layers) {
        json jl;
        jl["kind"] = kind_name(l.kind);
        switch (l.kind) {
            case LayerDesc::Kind::Dense: jl["width"] = l.width; break;
            case LayerDesc::Kind::SelfAttention: jl["d_k"] = l.d_k; break;
            case LayerDesc::Kind::Activation:
                jl["act"] = act_name(l.act);
                if (l.act == Act::LeakyRelu) jl["slope"] = l.slope;
                break;
            case LayerDesc::Kind::Dropout: jl["rate"] = l.rate; break;
            case LayerDesc::Kind::BatchNorm: break;
        }
        j["layers"].push_back(jl);
    }
    return j.dump();
}

NetworkSpec NetworkSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    NetworkSpec s;
    s.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& jl : j.at("layers")) {
        LayerDesc d;
        d.kind = kind_from(jl.at("kind").get<std::string>());
        switch (d.kind) {
            case LayerDesc::Kind::Dense: d.width = jl.at("width").get<std::size_t>(); break;
            case LayerDesc::Kind::SelfAttention: d.d_k = jl.at("d_k").get<std::size_t>(); break;
            case LayerDesc::Kind::Activation:
                d.act = act_from(jl.at("act").get<std::string>());
                if (d.act == Act::LeakyRelu) d.slope = jl.at("slope").get<double>();
                break;
            case LayerDesc::Kind::Dropout: d.rate = jl.at("rate").get<double>(); break;
            case LayerDesc::Kind::BatchNorm: break;
        }
        s.layers.push_back(d);
    }
    s.validate();
    return s;
}

// ---- construction ----

namespace {

Tensor he_uniform(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::vector<double> v(in * out);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::leaf({in, out}, std::move(v), true);
}

}  // namespace

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network net;
    net.spec_ = spec;
    Rng rng(derive_seed(seed, 0x6c617965));
    std::size_t width = spec.input_dim;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const auto& desc = spec.layers[li];
        LayerState st;
        st.desc = desc;
        switch (desc.kind) {
            case LayerDesc::Kind::Dense:
                st.dense.weight = he_uniform(width, desc.width, rng);
                st.dense.has_bias = li + 1 >= spec.layers.size() ||
                                    spec.layers[li + 1].kind != LayerDesc::Kind::BatchNorm;
                st.dense.bias = Tensor::zeros({desc.width}, st.dense.has_bias);
                width = desc.width;
                break;
            case LayerDesc::Kind::SelfAttention:
                st.attn.w_q = he_uniform(1, desc.d_k, rng);
                st.attn.w_k = he_uniform(1, desc.d_k, rng);
                st.attn.w_v = he_uniform(1, 1, rng);
                st.attn.d_k = desc.d_k;
                st.attn.token_length = width;
                break;
            case LayerDesc::Kind::BatchNorm:
                st.bn.gamma = Tensor::full({width}, 1.0, true);
                st.bn.beta = Tensor::zeros({width}, true);
                st.bn.running_mean.assign(width, 0.0);
                st.bn.running_var.assign(width, 1.0);
                break;
            case LayerDesc::Kind::Activation:
            case LayerDesc::Kind::Dropout:
                break;
        }
        net.layers_.push_back(std::move(st));
    }
    return net;
}

// ---- forward ----

Tensor attention_forward(const Tensor& x_tokens, const AttentionBlock& block) {
    if (block.d_k == 0) throw ConfigError("attention_forward: d_k must be positive");
    if (x_tokens.shape().size() != 2 || x_tokens.shape()[1] != 1) {
        throw DimensionError("attention_forward: expected [L,1] tokens, got " +
                             shape_str(x_tokens.shape()));
    }
    Tensor q = matmul(x_tokens, block.w_q);  // [L, d_k]
    Tensor k = matmul(x_tokens, block.w_k);  // [L, d_k]
    Tensor v = matmul(x_tokens, block.w_v);  // [L, 1]
    Tensor scores = mul_scalar(matmul(q, transpose(k)), 1.0 / std::sqrt(double(block.d_k)));
    Tensor alpha = softmax_rows(scores);  // rows nonnegative, sum to 1
    return matmul(alpha, v);
}

namespace {

// Batched attention over [B, L] activations; returns [B, L].
Tensor attention_batch(const Tensor& x, const AttentionBlock& block, bool frozen) {
    const std::size_t B = x.shape()[0], L = x.shape()[1];
    Tensor wq = frozen ? block.w_q.detach() : block.w_q;
    Tensor wk = frozen ? block.w_k.detach() : block.w_k;
    Tensor wv = frozen ? block.w_v.detach() : block.w_v;

    Tensor flat = reshape(x, {B * L, 1});
    Tensor q = reshape(matmul(flat, wq), {B, L, block.d_k});
    Tensor k = reshape(matmul(flat, wk), {B, L, block.d_k});
    Tensor v = reshape(matmul(flat, wv), {B, L, 1});

    Tensor scores = mul_scalar(bmm(q, transpose_last2(k)), 1.0 / std::sqrt(double(block.d_k)));
    Tensor alpha = reshape(softmax_rows(reshape(scores, {B * L, L})), {B, L, L});
    return reshape(bmm(alpha, v), {B, L});
}

}  // namespace

Tensor Network::forward(const Tensor& x, ForwardMode mode, Rng* dropout_rng) {
    if (x.shape().size() != 2 || x.shape()[1] != spec_.input_dim) {
        throw DimensionError("Network::forward: expected [batch," +
                             std::to_string(spec_.input_dim) + "], got " + shape_str(x.shape()));
    }
    const bool frozen = mode == ForwardMode::Frozen;
    const bool training = mode != ForwardMode::Eval;
    Tensor h = x;
    for (auto& st : layers_) {
        switch (st.desc.kind) {
            case LayerDesc::Kind::Dense: {
                Tensor w = frozen ? st.dense.weight.detach() : st.dense.weight;
                h = matmul(h, w);
                if (st.dense.has_bias) {
                    h = add_rowvec(h, frozen ? st.dense.bias.detach() : st.dense.bias);
                }
                break;
            }
            case LayerDesc::Kind::SelfAttention:
                h = add(h, attention_batch(h, st.attn, frozen));
                break;
            case LayerDesc::Kind::BatchNorm: {
                auto& bn = st.bn;
                const std::size_t m = h.shape()[0], n = h.shape()[1];
                Tensor gamma = frozen ? bn.gamma.detach() : bn.gamma;
                Tensor beta = frozen ? bn.beta.detach() : bn.beta;
                if (training) {
                    const double inv_m = 1.0 / static_cast<double>(m);
                    Tensor mu = mul_scalar(sum_cols(h), inv_m);
                    Tensor centered = sub(h, broadcast_row(mu, m));
                    Tensor var = mul_scalar(sum_cols(mul(centered, centered)), inv_m);
                    Tensor inv_std = reciprocal(sqrt(add_scalar(var, bn.epsilon)));
                    Tensor xn = mul(centered, broadcast_row(inv_std, m));
                    h = add_rowvec(mul(xn, broadcast_row(gamma, m)), beta);
                    if (mode == ForwardMode::Train) {
                        const auto& mv = mu.values();
                        const auto& vv = var.values();
                        for (std::size_t j = 0; j < n; ++j) {
                            bn.running_mean[j] =
                                bn.momentum * bn.running_mean[j] + (1.0 - bn.momentum) * mv[j];
                            bn.running_var[j] =
                                bn.momentum * bn.running_var[j] + (1.0 - bn.momentum) * vv[j];
                        }
                    }
                } else {
                    std::vector<double> inv(n);
                    for (std::size_t j = 0; j < n; ++j)
                        inv[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.epsilon);
                    Tensor mu = Tensor::leaf({n}, bn.running_mean, false);
                    Tensor inv_std = Tensor::leaf({n}, std::move(inv), false);
                    Tensor xn = mul(sub(h, broadcast_row(mu, m)), broadcast_row(inv_std, m));
                    h = add_rowvec(mul(xn, broadcast_row(gamma, m)), beta);
                }
                break;
            }
            case LayerDesc::Kind::Activation:
                switch (st.desc.act) {
                    case Act::LeakyRelu: h = leaky_relu(h, st.desc.slope); break;
                    case Act::Tanh: h = tanh(h); break;
                    case Act::Sigmoid: h = sigmoid(h); break;
                    case Act::None: break;
                }
                break;
            case LayerDesc::Kind::Dropout: {
                const double rate = st.desc.rate;
                if (rate > 0.0 && training) {
                    if (!dropout_rng)
                        throw ConfigError("Network::forward: dropout active but no rng supplied");
                    const double keep = 1.0 - rate;
                    std::vector<double> mask(h.size());
                    for (auto& v : mask) v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
                    h = mul(h, Tensor::leaf(h.shape(), std::move(mask), false));
                }
                break;
            }
        }
    }
    return h;
}

std::vector<Tensor> Network::parameters() const {
    std::vector<Tensor> out;
    for (const auto& st : layers_) {
        switch (st.desc.kind) {
            case LayerDesc::Kind::Dense:
                out.push_back(st.dense.weight);
                if (st.dense.has_bias) out.push_back(st.dense.bias);
                break;
            case LayerDesc::Kind::SelfAttention:
                out.push_back(st.attn.w_q);
                out.push_back(st.attn.w_k);
                out.push_back(st.attn.w_v);
                break;
            case LayerDesc::Kind::BatchNorm:
                out.push_back(st.bn.gamma);
                out.push_back(st.bn.beta);
                break;
            default:
                break;
        }
    }
    return out;
}

std::vector<double> Network::buffers_flat() const {
    std::vector<double> out;
    for (const auto& st : layers_) {
        if (st.desc.kind == LayerDesc::Kind::BatchNorm) {
            out.insert(out.end(), st.bn.running_mean.begin(), st.bn.running_mean.end());
            out.insert(out.end(), st.bn.running_var.begin(), st.bn.running_var.end());
        }
    }
    return out;
}

void Network::set_buffers_flat(const std::vector<double>& v) {
    std::size_t pos = 0;
    for (auto& st : layers_) {
        if (st.desc.kind == LayerDesc::Kind::BatchNorm) {
            auto& bn = st.bn;
            const std::size_t n = bn.running_mean.size();
            if (pos + 2 * n > v.size()) throw IoError("set_buffers_flat: buffer underrun");
            std::copy(v.begin() + pos, v.begin() + pos + n, bn.running_mean.begin());
            pos += n;
            std::copy(v.begin() + pos, v.begin() + pos + n, bn.running_var.begin());
            pos += n;
        }
    }
    if (pos != v.size()) throw IoError("set_buffers_flat: buffer size mismatch");
}

std::uint64_t parameter_hash(const Network& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : net.parameters()) {
        for (double d : p.values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, sizeof bits);
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

// ---- checkpoint ----

namespace {
constexpr char kMagic[9] = "GANCKPT1";

void write_u64(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::ifstream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
}  // namespace

void save_network(const Network& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("save_network: cannot open " + path);
    f.write(kMagic, 8);
    const std::string spec = net.spec().to_json();
    write_u64(f, spec.size());
    f.write(spec.data(), static_cast<std::streamsize>(spec.size()));

    std::vector<double> params;
    for (const auto& p : net.parameters()) {
        const auto& v = p.values();
        params.insert(params.end(), v.begin(), v.end());
    }
    write_u64(f, params.size());
    f.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));

    const auto buffers = net.buffers_flat();
    write_u64(f, buffers.size());
    f.write(reinterpret_cast<const char*>(buffers.data()),
            static_cast<std::streamsize>(buffers.size() * sizeof(double)));
    if (!f) throw IoError("save_network: write failed for " + path);
}

Network load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_network: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) {
        throw IoError("load_network: bad magic in " + path);
    }
    const std::uint64_t spec_len = read_u64(f);
    std::string spec_text(spec_len, '\0');
    f.read(spec_text.data(), static_cast<std::streamsize>(spec_len));
    NetworkSpec spec = NetworkSpec::from_json(spec_text);
    Network net = build_network(spec, 0);

    const std::uint64_t n_params = read_u64(f);
    std::vector<double> params(n_params);
    f.read(reinterpret_cast<char*>(params.data()),
           static_cast<std::streamsize>(n_params * sizeof(double)));
    std::size_t pos = 0;
    for (auto& p : net.parameters()) {
        const std::size_t n = p.size();
        if (pos + n > params.size()) throw IoError("load_network: parameter underrun");
        p.set_values({params.begin() + pos, params.begin() + pos + n});
        pos += n;
    }
    if (pos != params.size()) throw IoError("load_network: parameter count mismatch");

    const std::uint64_t n_buffers = read_u64(f);
    std::vector<double> buffers(n_buffers);
    f.read(reinterpret_cast<char*>(buffers.data()),
           static_cast<std::streamsize>(n_buffers * sizeof(double)));
    if (!f) throw IoError("load_network: truncated file " + path);
    net.set_buffers_flat(buffers);
    return net;
}

}  // namespace ganids
