#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ganids/trainer.hpp"

using namespace ganids;

namespace {

// Two Gaussian modes in 2-D, scaled into [-1,1].
std::vector<double> two_mode_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double cx = (i % 2 == 0) ? -0.5 : 0.5;
        v[i * 2] = cx + 0.05 * rng.normal();
        v[i * 2 + 1] = 0.05 * rng.normal();
        v[i * 2] = std::clamp(v[i * 2], -1.0, 1.0);
        v[i * 2 + 1] = std::clamp(v[i * 2 + 1], -1.0, 1.0);
    }
    return v;
}

TrainConfig toy_config(Variant v, std::uint64_t seed, std::size_t epochs) {
    TrainConfig cfg;
    cfg.variant = v;
    cfg.seed = seed;
    cfg.epochs = epochs;
    cfg.batch_size = 64;
    cfg.n_critic = 2;
    cfg.latent_dim = 4;
    cfg.arch = toy_arch(v, 16);
    return cfg;
}

std::vector<double> all_params(const GanBundle& b) {
    std::vector<double> out;
    auto grab = [&](const Network& n) {
        for (const auto& p : n.parameters())
            out.insert(out.end(), p.values().begin(), p.values().end());
    };
    grab(b.generator);
    grab(b.critic);
    if (b.js_discriminator) grab(*b.js_discriminator);
    return out;
}

}  // namespace

TEST_CASE("lambda_js schedule follows the published update rule") {
    JsScheduleState s;
    s.lambda_js = 1.0;
    s.update_period = 10;

    // r = 2 > 1 at an update epoch
    auto s2 = update_lambda_js(s, 2.0, 1.0, 10);
    CHECK(s2.lambda_js == doctest::Approx(1.05).epsilon(1e-15));
    CHECK(s2.ratio == doctest::Approx(2.0));

    // off-cycle epochs do nothing
    auto s3 = update_lambda_js(s, 2.0, 1.0, 11);
    CHECK(s3.lambda_js == 1.0);

    // clamp floor
    s.lambda_js = 0.1;
    auto s4 = update_lambda_js(s, 0.5, 1.0, 20);
    CHECK(s4.lambda_js == 0.1);

    // clamp ceiling: 9.8 * 1.05 = 10.29 -> 10
    s.lambda_js = 9.8;
    auto s5 = update_lambda_js(s, 2.0, 1.0, 20);
    CHECK(s5.lambda_js == 10.0);

    // zero denominator falls back to eps and records the event
    s.lambda_js = 1.0;
    auto s6 = update_lambda_js(s, 2.0, 0.0, 30);
    CHECK(s6.zero_denominator_events == 1);
    CHECK(s6.lambda_js == doctest::Approx(1.05));

    // constant mode never moves
    s.mode = JsSchedule::Constant;
    auto s7 = update_lambda_js(s, 2.0, 1.0, 10);
    CHECK(s7.lambda_js == s.lambda_js);

    // abs-ratio mode uses |l_c| / (l_d + eps)
    s.mode = JsSchedule::AbsRatio;
    s.lambda_js = 1.0;
    auto s8 = update_lambda_js(s, -2.0, 1.0, 10);
    CHECK(s8.lambda_js == doctest::Approx(1.05));
}

TEST_CASE("lambda_js stays in [0.1, 10] over adversarial sequences") {
    Rng rng(7);
    JsScheduleState s;
    s.update_period = 1;
    for (int i = 1; i <= 10000; ++i) {
        const double before = s.lambda_js;
        const double l_c = rng.uniform(-50, 50);
        const double l_js = rng.uniform() < 0.1 ? 0.0 : rng.uniform(0, 5);
        s = update_lambda_js(s, l_c, l_js, i);
        REQUIRE(s.lambda_js >= 0.1);
        REQUIRE(s.lambda_js <= 10.0);
        const double stepped = s.ratio > 1.0 ? before * 1.05 : before * 0.95;
        REQUIRE(s.lambda_js == std::clamp(stepped, 0.1, 10.0));
    }
}

TEST_CASE("adam closed-form first step and zero-grad fixpoint") {
    Tensor p = Tensor::leaf({1}, {1.0}, true);
    AdamState st;
    adam_step({p}, {{0.0}}, st, 0.1, 0.5, 0.9);
    CHECK(p.values()[0] == 1.0);

    // constant grad 1: first bias-corrected step is -lr within eps rounding
    Tensor q = Tensor::leaf({1}, {0.0}, true);
    AdamState st2;
    adam_step({q}, {{1.0}}, st2, 0.1, 0.5, 0.9);
    CHECK(q.values()[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("two identical adam optimizers stay bitwise equal") {
    Tensor a = Tensor::leaf({3}, {0.5, -0.5, 1.0}, true);
    Tensor b = Tensor::leaf({3}, {0.5, -0.5, 1.0}, true);
    AdamState sa, sb;
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> g = {rng.normal(), rng.normal(), rng.normal()};
        adam_step({a}, {g}, sa, 1e-3, 0.5, 0.9);
        adam_step({b}, {g}, sb, 1e-3, 0.5, 0.9);
        REQUIRE(a.values() == b.values());
    }
}

TEST_CASE("clip_global_norm caps the joint norm") {
    std::vector<std::vector<double>> g = {{3.0, 0.0}, {0.0, 4.0}};
    const double pre = clip_global_norm(g, 1.0);
    CHECK(pre == doctest::Approx(5.0));
    double sq = 0;
    for (auto& gi : g)
        for (double x : gi) sq += x * x;
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<std::vector<double>> small = {{0.1, 0.1}};
    clip_global_norm(small, 1.0);
    CHECK(small[0][0] == 0.1);
}

TEST_CASE("plain variant never builds a discriminator and trains deterministically") {
    auto data = two_mode_data(512, 1);
    DataSlice slice{data.data(), 512, 2};

    TrainConfig cfg = toy_config(Variant::Plain, 42, 5);
    GanBundle b1 = build_bundle(cfg, 2);
    CHECK_FALSE(b1.js_discriminator.has_value());
    TrainResult r1 = train_gan(b1, slice, cfg);
    CHECK(r1.history.size() == 5);
    for (const auto& row : r1.history) {
        CHECK(row.losses.l_d_bce == 0.0);
        CHECK(row.losses.l_g_js == 0.0);
    }

    GanBundle b2 = build_bundle(cfg, 2);
    TrainResult r2 = train_gan(b2, slice, cfg);
    CHECK(all_params(b1) == all_params(b2));
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].losses.l_g_total == r2.history[i].losses.l_g_total);
    }
}

TEST_CASE("phase isolation: each phase updates exactly one network") {
    auto data = two_mode_data(256, 3);
    DataSlice slice{data.data(), 256, 2};
    TrainConfig cfg = toy_config(Variant::SaJs, 7, 1);
    GanBundle b = build_bundle(cfg, 2);

    // Manual phases via train_epoch pieces: run one epoch and compare hashes
    // before/after against per-network snapshots.
    const auto g0 = parameter_hash(b.generator);
    const auto c0 = parameter_hash(b.critic);
    const auto d0 = parameter_hash(*b.js_discriminator);

    TrainStreams streams = TrainStreams::make(cfg.seed);
    JsScheduleState sched;
    sched.lambda_js = cfg.lambda_js_init;
    train_epoch(b, slice, cfg, sched, streams);

    CHECK(parameter_hash(b.generator) != g0);
    CHECK(parameter_hash(b.critic) != c0);
    CHECK(parameter_hash(*b.js_discriminator) != d0);
}

TEST_CASE("loss breakdown satisfies its identities during training") {
    auto data = two_mode_data(256, 5);
    DataSlice slice{data.data(), 256, 2};
    TrainConfig cfg = toy_config(Variant::Js, 9, 8);
    GanBundle b = build_bundle(cfg, 2);
    TrainResult r = train_gan(b, slice, cfg);
    for (const auto& row : r.history) {
        const auto& l = row.losses;
        CHECK(l.l_c_total ==
              doctest::Approx(l.l_c_wasserstein + cfg.lambda_gp * l.gp_term).epsilon(1e-12));
        REQUIRE(std::isfinite(l.l_g_total));
        REQUIRE(std::isfinite(l.l_d_bce));
    }
}

TEST_CASE("js variant with lambda 0 reproduces plain generator losses per step") {
    auto data = two_mode_data(512, 11);
    DataSlice slice{data.data(), 512, 2};

    TrainConfig plain_cfg = toy_config(Variant::Plain, 33, 40);
    TrainConfig js_cfg = toy_config(Variant::Js, 33, 40);
    js_cfg.lambda_js_init = 0.0;
    js_cfg.js_schedule = JsSchedule::Constant;
    // Identical generator and critic architectures; js adds only the
    // discriminator.
    js_cfg.arch = plain_cfg.arch;
    js_cfg.arch.d_widths = {16, 16};
    js_cfg.arch.d_attention = {false, false};

    GanBundle pb = build_bundle(plain_cfg, 2);
    GanBundle jb = build_bundle(js_cfg, 2);
    TrainResult pr = train_gan(pb, slice, plain_cfg);
    TrainResult jr = train_gan(jb, slice, js_cfg);
    REQUIRE(pr.history.size() == jr.history.size());
    for (std::size_t i = 0; i < pr.history.size(); ++i) {
        REQUIRE(pr.history[i].losses.l_g_total == jr.history[i].losses.l_g_total);
        REQUIRE(pr.history[i].losses.l_c_total == jr.history[i].losses.l_c_total);
    }
}

TEST_CASE("critic wasserstein gap shrinks on the two-mode toy set") {
    auto data = two_mode_data(512, 21);
    DataSlice slice{data.data(), 512, 2};
    std::vector<double> first_gaps, last_gaps;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig cfg = toy_config(Variant::Plain, 100 + seed, 200);
        cfg.n_critic = 10;  // fast critic warm-up so epoch 1 reflects a separated critic
        cfg.lr_g = 1e-3;
        cfg.lr_c = 3e-3;
        cfg.arch = toy_arch(Variant::Plain, 24);
        GanBundle b = build_bundle(cfg, 2);
        TrainResult r = train_gan(b, slice, cfg);
        first_gaps.push_back(std::abs(r.history.front().losses.l_c_wasserstein));
        last_gaps.push_back(std::abs(r.history.back().losses.l_c_wasserstein));
    }
    std::sort(first_gaps.begin(), first_gaps.end());
    std::sort(last_gaps.begin(), last_gaps.end());
    CHECK(last_gaps[2] < first_gaps[2]);  // median over 5 seeds
}

TEST_CASE("synthesize shape, range and determinism") {
    TrainConfig cfg = toy_config(Variant::Plain, 55, 1);
    GanBundle b = build_bundle(cfg, 3);

    Rng r1(77), r2(77);
    Tensor s1 = synthesize(b, 1, r1);
    CHECK(s1.shape() == Shape{1, 3});
    Tensor s2 = synthesize(b, 257, r2);
    for (double v : s2.values()) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
    Rng r3(77);
    Tensor s3 = synthesize(b, 1, r3);
    CHECK(s1.values() == s3.values());
    CHECK_THROWS_AS(synthesize(b, 0, r1), ContractError);
}

TEST_CASE("oversized batch falls back to replacement sampling with a warning") {
    auto data = two_mode_data(16, 31);
    DataSlice slice{data.data(), 16, 2};
    TrainConfig cfg = toy_config(Variant::Plain, 3, 2);
    cfg.batch_size = 64;
    GanBundle b = build_bundle(cfg, 2);
    TrainResult r = train_gan(b, slice, cfg);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("replacement") != std::string::npos);
}

TEST_CASE("loss history stays finite for all variants on the toy set") {
    auto data = two_mode_data(256, 41);
    DataSlice slice{data.data(), 256, 2};
    for (Variant v : {Variant::Plain, Variant::Sa, Variant::Js, Variant::SaJs}) {
        TrainConfig cfg = toy_config(v, 17, 30);
        GanBundle b = build_bundle(cfg, 2);
        TrainResult r = train_gan(b, slice, cfg);
        for (const auto& row : r.history) {
            REQUIRE(std::isfinite(row.losses.l_c_total));
            REQUIRE(std::isfinite(row.losses.l_g_total));
            REQUIRE(row.lambda_js >= 0.0);
        }
    }
}
