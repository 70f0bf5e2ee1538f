#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ganids/layers.hpp"
#include "ganids/losses.hpp"
#include "ganids/rng.hpp"

namespace ganids {

enum class Variant { Plain, Sa, Js, SaJs };

std::string variant_name(Variant v);
Variant variant_from(const std::string& s);
inline bool variant_has_attention(Variant v) { return v == Variant::Sa || v == Variant::SaJs; }
inline bool variant_has_js(Variant v) { return v == Variant::Js || v == Variant::SaJs; }

// Dense widths per network plus attention placement flags (one per dense
// layer). Empty widths mean "use the published architecture for the variant".
struct GanArch {
    std::vector<std::size_t> g_widths;
    std::vector<bool> g_attention;
    std::vector<std::size_t> c_widths;
    std::vector<bool> c_attention;
    std::vector<std::size_t> d_widths;
    std::vector<bool> d_attention;
    std::size_t d_k = 16;
    double leaky_slope = 0.2;
    double dropout = 0.0;   // generator only; 0 disables
    bool g_batchnorm = true;

    bool empty() const { return g_widths.empty(); }
};

// Architectures from the published table, per variant.
GanArch paper_arch(Variant v);
// Small architecture for desk-scale runs; attention variants get one block
// per network.
GanArch toy_arch(Variant v, std::size_t hidden = 64);

enum class JsSchedule { Constant, Ratio, AbsRatio };

std::string js_schedule_name(JsSchedule s);
JsSchedule js_schedule_from(const std::string& s);

struct TrainConfig {
    std::size_t batch_size = 256;
    std::size_t n_critic = 5;
    std::size_t epochs = 10000;
    double lr_g = 1e-4;
    double lr_c = 1e-4;
    double lr_d = 1e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.9;
    double adam_eps = 1e-8;
    double lambda_gp = 10.0;
    std::size_t latent_dim = 100;  // z ~ N(0,1)^latent_dim
    double grad_clip_norm = 1.0;   // global norm, per network per step
    std::uint64_t seed = 0;
    Variant variant = Variant::Plain;
    double lambda_js_init = 1.0;
    std::size_t js_update_period = 10;
    JsSchedule js_schedule = JsSchedule::Ratio;
    GanArch arch;  // empty -> paper_arch(variant)

    void validate() const;
};

// Multiplicative lambda_js adaptation. Steps are exactly x1.05 / x0.95
// pre-clamp; the value never leaves [0.1, 10].
struct JsScheduleState {
    double lambda_js = 1.0;
    std::size_t update_period = 10;
    double ratio = 0.0;  // last computed
    double eps_denominator = 1e-8;
    JsSchedule mode = JsSchedule::Ratio;
    std::size_t zero_denominator_events = 0;
};

// Acts only when epoch % update_period == 0 (1-based epochs). Ratio mode:
// r = l_c / l_js; abs-ratio mode: r = |l_c| / (l_d + eps); constant mode:
// no-op. l_js and l_d are the same discriminator BCE value here.
JsScheduleState update_lambda_js(JsScheduleState sched, double l_c, double l_js,
                                 std::size_t epoch);

// ---- Adam ----

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t t = 0;
};

// Bias-corrected Adam over parameter tensors; grads are raw buffers aligned
// with params. State is lazily sized on first use.
void adam_step(const std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps = 1e-8);

// Scales grads so their global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm);

// ---- bundle & loop ----

struct GanBundle {
    Variant variant = Variant::Plain;
    Network generator;
    Network critic;
    std::optional<Network> js_discriminator;
    AdamState adam_g, adam_c, adam_d;
    std::size_t latent_dim = 0;
    std::size_t data_dim = 0;
};

GanBundle build_bundle(const TrainConfig& cfg, std::size_t data_dim);

// Read-only view of training rows in [-1,1], row-major.
struct DataSlice {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

// Independent deterministic streams per phase so that one phase's draws
// never shift another's (the discriminator phase must not perturb the
// generator phase between variants).
struct TrainStreams {
    Rng a_data, a_z, a_eps, a_drop;
    Rng b_data, b_z, b_drop;
    Rng c_z, c_drop;
    static TrainStreams make(std::uint64_t seed);
};

struct EpochResult {
    LossBreakdown losses;           // epoch-final values
    double critic_loss_epoch_mean = 0.0;
    bool sampled_with_replacement = false;
};

// One epoch of the three-phase loop: n_critic critic steps, one
// discriminator step when present, one generator step. Each step clips the
// global gradient norm and applies Adam to exactly one network.
EpochResult train_epoch(GanBundle& bundle, DataSlice data, const TrainConfig& cfg,
                        const JsScheduleState& sched, TrainStreams& streams);

struct TrainLogRow {
    std::size_t epoch = 0;
    LossBreakdown losses;
    double lambda_js = 0.0;
};

struct TrainResult {
    std::vector<TrainLogRow> history;
    JsScheduleState schedule;
    std::vector<std::string> warnings;
};

// Full training run: epochs, schedule updates, loss history.
TrainResult train_gan(GanBundle& bundle, DataSlice data, const TrainConfig& cfg);

// Draws z ~ N(0,1)^latent and returns generator samples [count, data_dim] in
// (-1,1); inference-mode batchnorm.
Tensor synthesize(GanBundle& bundle, std::size_t count, Rng& rng);

// Writes per-epoch loss history as CSV.
void write_train_log(const TrainResult& result, const std::string& path);

}  // namespace ganids
