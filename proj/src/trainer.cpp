#include "ganids/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ganids {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Plain: return "plain";
        case Variant::Sa: return "sa";
        case Variant::Js: return "js";
        case Variant::SaJs: return "sa_js";
    }
    throw ConfigError("unknown variant");
}

Variant variant_from(const std::string& s) {
    if (s == "plain") return Variant::Plain;
    if (s == "sa") return Variant::Sa;
    if (s == "js") return Variant::Js;
    if (s == "sa_js") return Variant::SaJs;
    throw ConfigError("unknown variant '" + s + "'");
}

std::string js_schedule_name(JsSchedule s) {
    switch (s) {
        case JsSchedule::Constant: return "constant";
        case JsSchedule::Ratio: return "ratio";
        case JsSchedule::AbsRatio: return "abs_ratio";
    }
    throw ConfigError("unknown schedule");
}

JsSchedule js_schedule_from(const std::string& s) {
    if (s == "constant") return JsSchedule::Constant;
    if (s == "ratio") return JsSchedule::Ratio;
    if (s == "abs_ratio") return JsSchedule::AbsRatio;
    throw ConfigError("unknown schedule '" + s + "'");
}

GanArch paper_arch(Variant v) {
    GanArch a;
    switch (v) {
        case Variant::Plain:
            a.g_widths = {128, 256, 512};
            a.g_attention = {false, false, false};
            a.c_widths = {512, 256, 128};
            a.c_attention = {false, false, false};
            break;
        case Variant::Sa:
            a.g_widths = {128, 256, 512};
            a.g_attention = {true, true, true};
            a.c_widths = {512, 256, 128};
            a.c_attention = {true, true, true};
            break;
        case Variant::Js:
            a.g_widths = {64, 64, 128, 256, 512, 1024};
            a.g_attention = std::vector<bool>(6, false);
            a.c_widths = {128, 64, 32, 16};
            a.c_attention = std::vector<bool>(4, false);
            a.d_widths = {128, 64, 32, 16};
            a.d_attention = std::vector<bool>(4, false);
            break;
        case Variant::SaJs:
            a.g_widths = {64, 64, 128, 256, 512, 1024};
            a.g_attention = {false, false, true, true, true, false};
            a.c_widths = {128, 64, 32, 16};
            a.c_attention = {true, true, false, false};
            a.d_widths = {128, 64, 32, 16};
            a.d_attention = {true, true, false, false};
            break;
    }
    return a;
}

GanArch toy_arch(Variant v, std::size_t hidden) {
    GanArch a;
    const bool sa = variant_has_attention(v);
    a.g_widths = {hidden, hidden};
    a.g_attention = {sa, false};
    a.c_widths = {hidden, hidden};
    a.c_attention = {sa, false};
    if (variant_has_js(v)) {
        a.d_widths = {hidden, hidden};
        a.d_attention = {sa, false};
    }
    return a;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("TrainConfig: batch_size must be positive");
    if (n_critic == 0) throw ConfigError("TrainConfig: n_critic must be positive");
    if (latent_dim == 0) throw ConfigError("TrainConfig: latent_dim must be positive");
    if (lambda_gp < 0) throw ConfigError("TrainConfig: lambda_gp must be >= 0");
    if (lambda_js_init < 0) throw ConfigError("TrainConfig: lambda_js_init must be >= 0");
    if (js_update_period == 0) throw ConfigError("TrainConfig: js_update_period must be positive");
    if (grad_clip_norm <= 0) throw ConfigError("TrainConfig: grad_clip_norm must be positive");
}

// ---- lambda_js schedule ----

JsScheduleState update_lambda_js(JsScheduleState sched, double l_c, double l_js,
                                 std::size_t epoch) {
    if (sched.mode == JsSchedule::Constant) return sched;
    if (epoch % sched.update_period != 0) return sched;

    double denom = l_js;
    if (sched.mode == JsSchedule::AbsRatio) denom = l_js + sched.eps_denominator;
    if (denom == 0.0) {
        denom = sched.eps_denominator;
        sched.zero_denominator_events++;
    }
    const double num = sched.mode == JsSchedule::AbsRatio ? std::abs(l_c) : l_c;
    sched.ratio = num / denom;
    sched.lambda_js *= (sched.ratio > 1.0) ? 1.05 : 0.95;
    sched.lambda_js = std::clamp(sched.lambda_js, 0.1, 10.0);
    return sched;
}

// ---- Adam ----

void adam_step(const std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size()) throw ContractError("adam_step: params/grads mismatch");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0);
            state.v[i].assign(params[i].size(), 0.0);
        }
    }
    state.t++;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size() != grads[i].size()) {
            throw ContractError("adam_step: grad size mismatch at param " + std::to_string(i));
        }
        auto& m = state.m[i];
        auto& v = state.v[i];
        std::vector<double> delta(grads[i].size());
        for (std::size_t j = 0; j < grads[i].size(); ++j) {
            const double g = grads[i][j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            delta[j] = -lr * mhat / (std::sqrt(vhat) + eps);
        }
        Tensor p = params[i];
        p.add_to_values(delta);
    }
}

double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double x : g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (auto& g : grads)
            for (double& x : g) x *= scale;
    }
    return norm;
}

// ---- bundle construction ----

namespace {

NetworkSpec generator_spec(const GanArch& a, std::size_t latent_dim, std::size_t out_dim) {
    NetworkSpec s;
    s.input_dim = latent_dim;
    for (std::size_t i = 0; i < a.g_widths.size(); ++i) {
        s.dense(a.g_widths[i]);
        if (i < a.g_attention.size() && a.g_attention[i]) s.attention(a.d_k);
        if (a.g_batchnorm) s.batchnorm();
        s.activation(Act::LeakyRelu, a.leaky_slope);
        if (a.dropout > 0.0) s.dropout(a.dropout);
    }
    s.dense(out_dim);
    s.activation(Act::Tanh);
    return s;
}

NetworkSpec scorer_spec(const std::vector<std::size_t>& widths, const std::vector<bool>& attn,
                        const GanArch& a, std::size_t in_dim) {
    NetworkSpec s;
    s.input_dim = in_dim;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        s.dense(widths[i]);
        if (i < attn.size() && attn[i]) s.attention(a.d_k);
        s.activation(Act::LeakyRelu, a.leaky_slope);
    }
    s.dense(1);  // Wasserstein score or BCE logit
    return s;
}

enum : std::uint64_t {
    kStreamParamG = 1,
    kStreamParamC = 2,
    kStreamParamD = 3,
    kStreamAData = 4,
    kStreamAZ = 5,
    kStreamAEps = 6,
    kStreamADrop = 7,
    kStreamBData = 8,
    kStreamBZ = 9,
    kStreamBDrop = 10,
    kStreamCZ = 11,
    kStreamCDrop = 12,
    kStreamSynth = 13,
};

Tensor sample_rows(DataSlice data, std::size_t m, Rng& rng, bool* with_replacement) {
    auto idx = sample_indices(data.rows, m, rng, with_replacement);
    std::vector<double> v(m * data.cols);
    for (std::size_t i = 0; i < m; ++i) {
        const double* src = data.data + idx[i] * data.cols;
        std::copy(src, src + data.cols, v.begin() + i * data.cols);
    }
    return Tensor::leaf({m, data.cols}, std::move(v), false);
}

Tensor sample_latent(std::size_t m, std::size_t latent, Rng& rng) {
    std::vector<double> v(m * latent);
    for (auto& x : v) x = rng.normal();
    return Tensor::leaf({m, latent}, std::move(v), false);
}

std::vector<std::vector<double>> grads_for(const Tensor& loss, const std::vector<Tensor>& params) {
    auto gts = gradients(loss, params, /*create_graph=*/false);
    std::vector<std::vector<double>> out;
    out.reserve(gts.size());
    for (auto& g : gts) out.push_back(g.values());
    return out;
}

}  // namespace

GanBundle build_bundle(const TrainConfig& cfg, std::size_t data_dim) {
    cfg.validate();
    if (data_dim == 0) throw ConfigError("build_bundle: data_dim must be positive");
    GanArch arch = cfg.arch.empty() ? paper_arch(cfg.variant) : cfg.arch;

    GanBundle b;
    b.variant = cfg.variant;
    b.latent_dim = cfg.latent_dim;
    b.data_dim = data_dim;
    b.generator = build_network(generator_spec(arch, cfg.latent_dim, data_dim),
                                derive_seed(cfg.seed, kStreamParamG));
    b.critic = build_network(scorer_spec(arch.c_widths, arch.c_attention, arch, data_dim),
                             derive_seed(cfg.seed, kStreamParamC));
    if (variant_has_js(cfg.variant)) {
        auto d_widths = arch.d_widths.empty() ? arch.c_widths : arch.d_widths;
        auto d_attn = arch.d_widths.empty() ? arch.c_attention : arch.d_attention;
        b.js_discriminator = build_network(scorer_spec(d_widths, d_attn, arch, data_dim),
                                           derive_seed(cfg.seed, kStreamParamD));
    }
    return b;
}

TrainStreams TrainStreams::make(std::uint64_t seed) {
    return TrainStreams{
        Rng(derive_seed(seed, kStreamAData)), Rng(derive_seed(seed, kStreamAZ)),
        Rng(derive_seed(seed, kStreamAEps)),  Rng(derive_seed(seed, kStreamADrop)),
        Rng(derive_seed(seed, kStreamBData)), Rng(derive_seed(seed, kStreamBZ)),
        Rng(derive_seed(seed, kStreamBDrop)), Rng(derive_seed(seed, kStreamCZ)),
        Rng(derive_seed(seed, kStreamCDrop)),
    };
}

EpochResult train_epoch(GanBundle& bundle, DataSlice data, const TrainConfig& cfg,
                        const JsScheduleState& sched, TrainStreams& streams) {
    if (data.rows == 0 || data.cols != bundle.data_dim) {
        throw ContractError("train_epoch: data slice does not match bundle");
    }
    const std::size_t m = cfg.batch_size;
    const bool has_d = bundle.js_discriminator.has_value();
    EpochResult res;

    // (A) critic: n_critic steps, theta_C only
    auto critic_params = bundle.critic.parameters();
    double l_c_sum = 0.0;
    for (std::size_t t = 0; t < cfg.n_critic; ++t) {
        bool repl = false;
        Tensor x_real = sample_rows(data, m, streams.a_data, &repl);
        res.sampled_with_replacement = res.sampled_with_replacement || repl;
        Tensor z = sample_latent(m, cfg.latent_dim, streams.a_z);
        Tensor x_fake =
            bundle.generator.forward(z, ForwardMode::Frozen, &streams.a_drop).detach();

        Tensor s_real = bundle.critic.forward(x_real, ForwardMode::Train);
        Tensor s_fake = bundle.critic.forward(x_fake, ForwardMode::Train);
        GpSample interp = gp_interpolate(x_real, x_fake, streams.a_eps);
        Tensor gp = gradient_penalty_at(
            [&](const Tensor& x) { return bundle.critic.forward(x, ForwardMode::Train); },
            interp.x_hat);
        Tensor wass = sub(mean(s_fake), mean(s_real));
        Tensor l_c = add(wass, mul_scalar(gp, cfg.lambda_gp));

        auto grads = grads_for(l_c, critic_params);
        clip_global_norm(grads, cfg.grad_clip_norm);
        adam_step(critic_params, grads, bundle.adam_c, cfg.lr_c, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);

        res.losses.l_c_wasserstein = wass.item();
        res.losses.gp_term = gp.item();
        res.losses.l_c_total = l_c.item();
        l_c_sum += res.losses.l_c_total;
    }
    res.critic_loss_epoch_mean = l_c_sum / static_cast<double>(cfg.n_critic);

    // (B) discriminator: one step, theta_D only; G and C untouched
    if (has_d) {
        bool repl = false;
        Tensor x_real = sample_rows(data, m, streams.b_data, &repl);
        res.sampled_with_replacement = res.sampled_with_replacement || repl;
        Tensor z = sample_latent(m, cfg.latent_dim, streams.b_z);
        Tensor x_fake =
            bundle.generator.forward(z, ForwardMode::Frozen, &streams.b_drop).detach();
        Tensor u_real = bundle.js_discriminator->forward(x_real, ForwardMode::Train);
        Tensor u_fake = bundle.js_discriminator->forward(x_fake, ForwardMode::Train);
        Tensor l_d = js_discriminator_loss(u_real, u_fake);

        auto d_params = bundle.js_discriminator->parameters();
        auto grads = grads_for(l_d, d_params);
        clip_global_norm(grads, cfg.grad_clip_norm);
        adam_step(d_params, grads, bundle.adam_d, cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);
        res.losses.l_d_bce = l_d.item();
    }

    // (C) generator: one step, theta_G only; C (and D) frozen
    {
        Tensor z = sample_latent(m, cfg.latent_dim, streams.c_z);
        Tensor x_fake = bundle.generator.forward(z, ForwardMode::Train, &streams.c_drop);
        Tensor s_fake = bundle.critic.forward(x_fake, ForwardMode::Frozen);
        std::optional<Tensor> d_logits;
        if (has_d) d_logits = bundle.js_discriminator->forward(x_fake, ForwardMode::Frozen);
        GeneratorLoss gl = generator_total_loss(s_fake, d_logits, has_d ? sched.lambda_js : 0.0);

        auto g_params = bundle.generator.parameters();
        auto grads = grads_for(gl.total, g_params);
        clip_global_norm(grads, cfg.grad_clip_norm);
        adam_step(g_params, grads, bundle.adam_g, cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);

        res.losses.l_g_wasserstein = gl.wasserstein;
        res.losses.l_g_js = gl.js;
        res.losses.l_g_total = gl.total.item();
    }
    return res;
}

TrainResult train_gan(GanBundle& bundle, DataSlice data, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult out;
    TrainStreams streams = TrainStreams::make(cfg.seed);
    JsScheduleState sched;
    sched.lambda_js = cfg.lambda_js_init;
    sched.update_period = cfg.js_update_period;
    sched.mode = cfg.js_schedule;

    bool warned_replacement = false;
    out.history.reserve(cfg.epochs);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochResult er = train_epoch(bundle, data, cfg, sched, streams);
        if (er.sampled_with_replacement && !warned_replacement) {
            out.warnings.push_back("batch_size " + std::to_string(cfg.batch_size) +
                                   " exceeds dataset rows " + std::to_string(data.rows) +
                                   "; sampling with replacement");
            warned_replacement = true;
        }
        if (bundle.js_discriminator.has_value()) {
            sched = update_lambda_js(sched, er.critic_loss_epoch_mean, er.losses.l_d_bce, epoch);
        }
        out.history.push_back({epoch, er.losses, sched.lambda_js});
    }
    out.schedule = sched;
    return out;
}

Tensor synthesize(GanBundle& bundle, std::size_t count, Rng& rng) {
    if (count == 0) throw ContractError("synthesize: count must be positive");
    NoGradGuard guard;
    // Batched to bound peak memory on large counts.
    const std::size_t chunk = 4096;
    std::vector<double> out;
    out.reserve(count * bundle.data_dim);
    for (std::size_t off = 0; off < count; off += chunk) {
        const std::size_t n = std::min(chunk, count - off);
        Tensor z = sample_latent(n, bundle.latent_dim, rng);
        Tensor g = bundle.generator.forward(z, ForwardMode::Eval);
        out.insert(out.end(), g.values().begin(), g.values().end());
    }
    return Tensor::leaf({count, bundle.data_dim}, std::move(out), false);
}

void write_train_log(const TrainResult& result, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("write_train_log: cannot open " + path);
    f << "epoch,l_c_wasserstein,gp_term,l_c_total,l_d_bce,l_g_wasserstein,l_g_js,l_g_total,"
         "lambda_js\n";
    char buf[512];
    for (const auto& row : result.history) {
        const auto& l = row.losses;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      row.epoch, l.l_c_wasserstein, l.gp_term, l.l_c_total, l.l_d_bce,
                      l.l_g_wasserstein, l.l_g_js, l.l_g_total, row.lambda_js);
        f << buf;
    }
    if (!f) throw IoError("write_train_log: write failed for " + path);
}

}  // namespace ganids
