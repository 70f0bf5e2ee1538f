#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganids/rng.hpp"
#include "ganids/tensor.hpp"

namespace ganids {

enum class Act { None, LeakyRelu, Tanh, Sigmoid };

struct LayerDesc {
    enum class Kind { Dense, SelfAttention, BatchNorm, Activation, Dropout };
    Kind kind = Kind::Dense;
    std::size_t width = 0;   // Dense output width
    Act act = Act::None;     // Activation
    double slope = 0.2;      // LeakyRelu slope
    std::size_t d_k = 16;    // SelfAttention key dimension
    double rate = 0.0;       // Dropout rate

    bool operator==(const LayerDesc&) const = default;
};

// Ordered layer chain. Dense layers set the running width; attention,
// batchnorm, activation and dropout preserve it.
struct NetworkSpec {
    std::size_t input_dim = 0;

    std::vector<LayerDesc> layers;

    NetworkSpec& dense(std::size_t width);
    NetworkSpec& attention(std::size_t d_k = 16);
    NetworkSpec& batchnorm();
    NetworkSpec& activation(Act a, double slope = 0.2);
    NetworkSpec& dropout(double rate);

    std::size_t output_dim() const;
    void validate() const;

    std::string to_json() const;
    static NetworkSpec from_json(const std::string& text);
    bool operator==(const NetworkSpec&) const = default;
};

struct DenseLayer {
    Tensor weight;  // [in, out], He-uniform
    Tensor bias;    // [out], zero-initialized
    // A dense layer feeding directly into batchnorm drops its bias: the
    // mean subtraction cancels it exactly, leaving a dead parameter.
    bool has_bias = true;
};

// Scaled dot-product attention over L tokens of width 1 (the tabular
// construction: a dense projection of width L reshaped to (L,1) tokens).
// Query/key projections lift tokens to d_k; the value projection keeps token
// width so the output is residual-compatible with the input.
struct AttentionBlock {
    Tensor w_q;  // [1, d_k]
    Tensor w_k;  // [1, d_k]
    Tensor w_v;  // [1, 1]
    std::size_t d_k = 0;
    std::size_t token_length = 0;
};

struct BatchNormLayer {
    Tensor gamma;  // [features]
    Tensor beta;   // [features]
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.9;
    double epsilon = 1e-5;
};

// Attention output for a single sample of L tokens: softmax(QK^T/sqrt(d_k))V.
// The caller adds the residual connection.
Tensor attention_forward(const Tensor& x_tokens, const AttentionBlock& block);

// Forward modes:
//   Train  - batch statistics, running stats updated, dropout active
//   Frozen - parameters detached (no grads into them), batch statistics,
//            running stats untouched, dropout active
//   Eval   - parameters as-is, running statistics, dropout off
enum class ForwardMode { Train, Frozen, Eval };

struct LayerState {
    LayerDesc desc;
    DenseLayer dense;
    AttentionBlock attn;
    BatchNormLayer bn;
};

class Network {
public:
    Network() = default;

    Tensor forward(const Tensor& x, ForwardMode mode, Rng* dropout_rng = nullptr);

    std::vector<Tensor> parameters() const;
    const NetworkSpec& spec() const { return spec_; }
    std::vector<LayerState>& layers() { return layers_; }
    const std::vector<LayerState>& layers() const { return layers_; }

    std::vector<double> buffers_flat() const;
    void set_buffers_flat(const std::vector<double>& v);

    friend Network build_network(const NetworkSpec& spec, std::uint64_t seed);

private:
    NetworkSpec spec_;
    std::vector<LayerState> layers_;
};

// Deterministic construction: same spec and seed give bit-identical
// parameters.
Network build_network(const NetworkSpec& spec, std::uint64_t seed);

// FNV-1a over the bit patterns of all trainable parameters.
std::uint64_t parameter_hash(const Network& net);

// Versioned binary checkpoint (spec JSON + raw parameter/buffer doubles).
// Round-trips bit-exactly.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace ganids
