#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ganids/rng.hpp"
#include "ganids/tensor.hpp"

namespace ganids {

// Per-step or per-epoch loss components. Totals satisfy
//   l_c_total = l_c_wasserstein + lambda_gp * gp_term
//   l_g_total = l_g_wasserstein + lambda_js * l_g_js
struct LossBreakdown {
    double l_c_wasserstein = 0.0;
    double gp_term = 0.0;
    double l_c_total = 0.0;
    double l_d_bce = 0.0;
    double l_g_wasserstein = 0.0;
    double l_g_js = 0.0;
    double l_g_total = 0.0;
};

// Interpolated points between real and fake rows, one uniform eps per row.
// x_hat is a fresh leaf flagged for gradients so the critic's input gradient
// can be taken at exactly these points.
struct GpSample {
    std::vector<double> eps;
    Tensor x_hat;
};

GpSample gp_interpolate(const Tensor& x_real, const Tensor& x_fake, Rng& rng);

// mean(fake) - mean(real) + lambda_gp * gp. Scores are [m] or [m,1].
Tensor critic_loss(const Tensor& scores_real, const Tensor& scores_fake, const Tensor& gp,
                   double lambda_gp);
Tensor critic_loss(const Tensor& scores_real, const Tensor& scores_fake, double gp,
                   double lambda_gp);

// mean over rows of (||grad_xhat critic(xhat)||_2 - 1)^2 at the given
// interpolates; differentiable w.r.t. critic parameters. The critic must map
// [m,d] to [m,1] row-independently.
Tensor gradient_penalty_at(const std::function<Tensor(const Tensor&)>& critic,
                           const Tensor& x_hat);
Tensor gradient_penalty(const std::function<Tensor(const Tensor&)>& critic, const Tensor& x_real,
                        const Tensor& x_fake, Rng& rng);

// Elementwise binary cross-entropy on logits, log-sum-exp form.
Tensor bce_with_logits(const Tensor& logits, double target);

// mean[BCE(logit_real,1) + BCE(logit_fake,0)]; stable for large |logits|.
Tensor js_discriminator_loss(const Tensor& logits_real, const Tensor& logits_fake);

// mean(-log sigmoid(logit)); the caller supplies logits produced with the
// discriminator frozen so gradients reach the generator only.
Tensor generator_js_regularizer(const Tensor& logits_fake);

struct GeneratorLoss {
    Tensor total;               // differentiable
    double wasserstein = 0.0;   // -mean(critic scores)
    double js = 0.0;            // regularizer value (0 when absent)
};

// -mean(scores) + lambda_js * js_regularizer. Passing lambda_js > 0 without
// discriminator logits is a configuration error.
GeneratorLoss generator_total_loss(const Tensor& scores_fake_from_c,
                                   const std::optional<Tensor>& logits_fake_from_d,
                                   double lambda_js);

}  // namespace ganids
