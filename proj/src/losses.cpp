#include "ganids/losses.hpp"

namespace ganids {

namespace {

void require_scores(const Tensor& t, const char* op) {
    const auto& s = t.shape();
    const bool ok = s.size() == 1 || (s.size() == 2 && s[1] == 1);
    if (!ok) throw ContractError(std::string(op) + ": scores must be [m] or [m,1], got " +
                                 shape_str(s));
    if (t.size() == 0) throw ContractError(std::string(op) + ": empty batch");
}

}  // namespace

GpSample gp_interpolate(const Tensor& x_real, const Tensor& x_fake, Rng& rng) {
    if (x_real.shape() != x_fake.shape()) {
        throw DimensionError("gp_interpolate: shape mismatch " + shape_str(x_real.shape()) +
                             " vs " + shape_str(x_fake.shape()));
    }
    const std::size_t m = x_real.rows(), d = x_real.cols();
    GpSample out;
    out.eps.resize(m);
    std::vector<double> v(m * d);
    const auto& r = x_real.values();
    const auto& f = x_fake.values();
    for (std::size_t i = 0; i < m; ++i) {
        const double e = rng.uniform_open01();
        out.eps[i] = e;
        for (std::size_t j = 0; j < d; ++j) {
            v[i * d + j] = e * r[i * d + j] + (1.0 - e) * f[i * d + j];
        }
    }
    out.x_hat = Tensor::leaf({m, d}, std::move(v), /*requires_grad=*/true);
    return out;
}

Tensor critic_loss(const Tensor& scores_real, const Tensor& scores_fake, const Tensor& gp,
                   double lambda_gp) {
    require_scores(scores_real, "critic_loss");
    require_scores(scores_fake, "critic_loss");
    if (scores_real.size() != scores_fake.size()) {
        throw ContractError("critic_loss: real/fake batch sizes differ");
    }
    if (lambda_gp < 0.0) throw ContractError("critic_loss: lambda_gp must be >= 0");
    Tensor w = sub(mean(scores_fake), mean(scores_real));
    return add(w, mul_scalar(gp, lambda_gp));
}

Tensor critic_loss(const Tensor& scores_real, const Tensor& scores_fake, double gp,
                   double lambda_gp) {
    return critic_loss(scores_real, scores_fake, Tensor::scalar(gp), lambda_gp);
}

Tensor gradient_penalty_at(const std::function<Tensor(const Tensor&)>& critic,
                           const Tensor& x_hat) {
    Tensor scores = critic(x_hat);
    const auto& s = scores.shape();
    if (!(s.size() == 2 && s[0] == x_hat.rows() && s[1] == 1)) {
        throw ContractError("gradient_penalty: critic must map [m,d] to [m,1], got " +
                            shape_str(s));
    }
    // Rows are independent, so the gradient of the score sum recovers each
    // row's own gradient.
    Tensor g = gradients(sum(scores), {x_hat}, /*create_graph=*/true)[0];
    Tensor sq = sum_rows(mul(g, g));
    // Small shift keeps the norm differentiable at zero gradient.
    Tensor norm = sqrt(add_scalar(sq, 1e-12));
    Tensor d = add_scalar(norm, -1.0);
    return mean(mul(d, d));
}

Tensor gradient_penalty(const std::function<Tensor(const Tensor&)>& critic, const Tensor& x_real,
                        const Tensor& x_fake, Rng& rng) {
    GpSample s = gp_interpolate(x_real, x_fake, rng);
    return gradient_penalty_at(critic, s.x_hat);
}

Tensor bce_with_logits(const Tensor& logits, double target) {
    if (target == 1.0) return softplus(neg(logits));
    if (target == 0.0) return softplus(logits);
    // -(y*log s(u) + (1-y)*log(1-s(u))) = softplus(u) - y*u
    return sub(softplus(logits), mul_scalar(logits, target));
}

Tensor js_discriminator_loss(const Tensor& logits_real, const Tensor& logits_fake) {
    require_scores(logits_real, "js_discriminator_loss");
    require_scores(logits_fake, "js_discriminator_loss");
    if (logits_real.size() != logits_fake.size()) {
        throw ContractError("js_discriminator_loss: batch sizes differ");
    }
    Tensor real_term = bce_with_logits(logits_real, 1.0);
    Tensor fake_term = bce_with_logits(reshape(logits_fake, logits_real.shape()), 0.0);
    return mean(add(real_term, fake_term));
}

Tensor generator_js_regularizer(const Tensor& logits_fake) {
    require_scores(logits_fake, "generator_js_regularizer");
    return mean(softplus(neg(logits_fake)));
}

GeneratorLoss generator_total_loss(const Tensor& scores_fake_from_c,
                                   const std::optional<Tensor>& logits_fake_from_d,
                                   double lambda_js) {
    require_scores(scores_fake_from_c, "generator_total_loss");
    if (lambda_js < 0.0) throw ContractError("generator_total_loss: lambda_js must be >= 0");
    if (lambda_js > 0.0 && !logits_fake_from_d.has_value()) {
        throw ConfigError("generator_total_loss: lambda_js > 0 requires discriminator logits");
    }
    GeneratorLoss out;
    Tensor w = neg(mean(scores_fake_from_c));
    out.wasserstein = w.item();
    if (logits_fake_from_d.has_value()) {
        Tensor js = generator_js_regularizer(*logits_fake_from_d);
        out.js = js.item();
        out.total = add(w, mul_scalar(js, lambda_js));
    } else {
        out.total = w;
    }
    return out;
}

}  // namespace ganids
