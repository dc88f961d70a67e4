#include "doctest.h"

#include "oracles.hpp"
#include "plsinet/errors.hpp"
#include "plsinet/simgen.hpp"
#include "plsinet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

using namespace plsinet;

namespace {

FitConfig quick(Family f = Family::gaussian) {
    FitConfig c;
    c.family = f;
    c.mlp.hidden = {16, 16};
    c.epochs = 60;
    return c;
}

ModelParams random_model(Rng& rng, std::size_t p, std::size_t q, const MlpSpec& spec) {
    ModelParams m;
    m.beta.resize(p);
    for (double& b : m.beta) b = rng.normal();
    m.beta = project_identifiable(m.beta).beta;
    m.gamma.resize(q);
    for (double& g : m.gamma) g = 0.5 * rng.normal();
    m.mlp = spec;
    m.theta = he_init(rng, spec);
    for (auto& v : m.theta.flat) v += 0.05 * rng.normal();
    return m;
}

} // namespace

TEST_SUITE("trainer") {

TEST_CASE("adam first step and zero gradients") {
    AdamState st(1);
    std::vector<double> x{0.0};
    const std::vector<double> g{1.0};
    adam_step(st, x, g, 0.1, {0.9, 0.999}, 1e-8);
    CHECK(x[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(st.t == 1);

    AdamState z(2);
    z.m = {0.4, -0.2};
    z.v = {0.3, 0.1};
    z.t = 5;
    std::vector<double> y{1.0, 2.0};
    const std::vector<double> zero{0.0, 0.0};
    const auto before = y;
    adam_step(z, y, zero, 0.1, {0.9, 0.999}, 1e-8);
    CHECK(z.m[0] == doctest::Approx(0.36));
    CHECK(z.v[1] == doctest::Approx(0.0999));
    CHECK(std::abs(z.m[0]) < 0.4);
    // Decayed but non-zero momentum still moves the parameters.
    CHECK(y[0] < before[0]);
    AdamState fresh(2);
    std::vector<double> w = before;
    adam_step(fresh, w, zero, 0.1, {0.9, 0.999}, 1e-8);
    CHECK(w == before);
}

TEST_CASE("shuffle") {
    Rng one(1);
    CHECK(shuffle_epoch(one, 1) == std::vector<std::size_t>{0});

    Rng a(5), b(5);
    CHECK(shuffle_epoch(a, 50) == shuffle_epoch(b, 50));

    Rng rng(9);
    std::map<std::vector<std::size_t>, int> freq;
    const int draws = 100000;
    for (int k = 0; k < draws; ++k) ++freq[shuffle_epoch(rng, 3)];
    CHECK(freq.size() == 6);
    for (const auto& [perm, count] : freq) {
        CHECK(std::abs(static_cast<double>(count) / draws - 1.0 / 6.0) < 0.01);
    }
}

TEST_CASE("initial beta") {
    Rng rng(1);
    const auto u = initial_beta(4, BetaInit::uniform_simplex_direction, rng);
    for (double v : u) CHECK(v == doctest::Approx(0.5));
    for (int k = 0; k < 20; ++k) {
        const auto r = initial_beta(5, BetaInit::random_sphere, rng);
        CHECK(std::abs(norm2(r) - 1.0) < 1e-12);
        CHECK(r[0] > 0.0);
    }
}

TEST_CASE("config validation and names") {
    FitConfig c;
    CHECK(c.learning_rate == 1e-3);
    CHECK(c.epochs == 500);
    CHECK(c.batch_size == 64);
    CHECK(c.early_stop_patience == 20);
    CHECK(c.validation_fraction == 0.2);
    CHECK(c.beta_init == BetaInit::linear_projection);
    CHECK_NOTHROW(c.validate());
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = FitConfig{};
    c.validation_fraction = 0.5;
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK(parse_beta_init(to_string(BetaInit::random_sphere)) == BetaInit::random_sphere);
    CHECK(parse_cox_batching("full") == CoxBatching::full);
    CHECK(parse_intercept_init("zero") == InterceptInit::zero);
}

TEST_CASE("objective gradients match finite differences of an independent evaluation") {
    Rng rng(31);
    const Family fams[] = {Family::gaussian, Family::binomial, Family::poisson, Family::cox};
    for (Family fam : fams) {
        for (int rep = 0; rep < 10; ++rep) {
            MlpSpec spec;
            spec.hidden = {3 + rng.uniform_index(4), 2 + rng.uniform_index(3)};
            const std::size_t n = 4 + rng.uniform_index(8), p = 3, q = 2;
            auto m = random_model(rng, p, q, spec);
            Dataset d;
            d.X = Matrix(n, p);
            d.Z = Matrix(n, q);
            for (auto& v : d.X.data()) v = rng.normal();
            for (auto& v : d.Z.data()) v = rng.normal();
            d.outcome.family = fam;
            for (std::size_t i = 0; i < n; ++i) {
                d.outcome.y.push_back(fam == Family::gaussian ? rng.normal()
                                      : fam == Family::binomial ? (rng.bernoulli(0.5) ? 1.0 : 0.0)
                                                                : static_cast<double>(rng.uniform_index(4)));
                d.outcome.time.push_back(1.0 + static_cast<double>(rng.uniform_index(5)));
                d.outcome.event.push_back(i == 0 || rng.bernoulli(0.6) ? 1.0 : 0.0);
            }
            if (fam == Family::cox) d.outcome.y.clear();
            else {
                d.outcome.time.clear();
                d.outcome.event.clear();
            }
            FitConfig cfg;
            cfg.family = fam;
            cfg.mlp = spec;
            cfg.anchoring_weight = rng.uniform() * 2.0;
            cfg.index_centering_weight = rep % 2 == 0 ? 0.0 : 0.3;

            const auto obj = evaluate_objective(m, d, cfg);
            CHECK(obj.value == doctest::Approx(oracle::objective(m, d, cfg)).epsilon(1e-12));

            auto flat_fn = [&](auto setter) {
                return [&, setter](const std::vector<double>& v) {
                    auto mm = m;
                    setter(mm, v);
                    return oracle::objective(mm, d, cfg);
                };
            };
            const auto fd_beta = oracle::central_diff(
                flat_fn([](ModelParams& mm, const std::vector<double>& v) { mm.beta = v; }), m.beta, 1e-5);
            const auto fd_gamma = oracle::central_diff(
                flat_fn([](ModelParams& mm, const std::vector<double>& v) { mm.gamma = v; }), m.gamma, 1e-5);
            const auto fd_theta = oracle::central_diff(
                flat_fn([](ModelParams& mm, const std::vector<double>& v) { mm.theta.flat = v; }),
                m.theta.flat, 1e-5);
            INFO(to_string(fam) << " rep " << rep);
            CHECK(oracle::rel_error(obj.grad_beta, fd_beta) < 1e-4);
            CHECK(oracle::rel_error(obj.grad_gamma, fd_gamma) < 1e-4);
            CHECK(oracle::rel_error(obj.grad_theta, fd_theta) < 1e-4);
        }
    }
}

TEST_CASE("linear projection start is the normalised OLS exposure direction") {
    const auto sim = simulate(reference_scenario(LinkShape::sigmoid, Family::gaussian, 500, 6));
    FitConfig cfg;
    cfg.mlp.hidden = {4};
    cfg.epochs = 1;
    cfg.learning_rate = 1e-15;
    cfg.validation_fraction = 0.0;
    cfg.early_stop_patience = 0;
    const auto res = fit(sim.data, cfg);
    const auto ref = oracle::ols(oracle::hstack(sim.data.X, sim.data.Z), sim.data.outcome.y);
    std::vector<double> dir(ref.coef.begin(), ref.coef.begin() + 8);
    const double nrm = norm2(dir);
    for (std::size_t j = 0; j < 8; ++j) CHECK(res.params.beta[j] == doctest::Approx(dir[j] / nrm).epsilon(1e-9));
    // gamma starts at the covariate-only least-squares fit
    const auto z_only = oracle::ols(sim.data.Z, sim.data.outcome.y);
    for (std::size_t k = 0; k < 4; ++k) CHECK(res.params.gamma[k] == doctest::Approx(z_only.coef[k]).epsilon(1e-9));

    cfg.family = Family::cox;
    const auto surv = simulate(reference_scenario(LinkShape::linear, Family::cox, 100, 6));
    const auto c = fit(surv.data, cfg);
    for (double b : c.params.beta) CHECK(b == doctest::Approx(1.0 / std::sqrt(8.0)).epsilon(1e-9));
}

TEST_CASE("fit recovers OLS for a purely linear covariate effect") {
    Rng rng(101);
    const std::size_t n = 1000;
    Dataset d;
    d.X = gen_exposures(rng, n, 0.3);
    d.Z = Matrix(n, 4);
    d.outcome.family = Family::gaussian;
    const std::vector<double> gamma{1.0, 1.0, -0.5, 0.5};
    for (std::size_t i = 0; i < n; ++i) {
        d.Z(i, 0) = 1.0;
        d.Z(i, 1) = rng.normal();
        d.Z(i, 2) = rng.normal();
        d.Z(i, 3) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        d.outcome.y.push_back(dot(d.Z.row(i), gamma) + rng.normal());
    }
    FitConfig cfg;
    cfg.seed = 4;
    const auto res = fit(d, cfg);
    const auto ref = oracle::ols(d.Z, d.outcome.y);
    // The link's average level over the sample is part of the implied intercept.
    const auto g = evaluate(res.params.theta, res.params.mlp, index(res.params, d.X));
    auto implied = res.params.gamma;
    implied[0] += mean(g);
    for (std::size_t k = 0; k < 4; ++k) {
        INFO("gamma " << k << " fit " << implied[k] << " ols " << ref.coef[k]);
        CHECK(std::abs(implied[k] - ref.coef[k]) <= 3.0 * ref.se[k]);
    }
    CHECK(std::abs(norm2(res.params.beta) - 1.0) < 1e-9);
}

TEST_CASE("fit on the linear-link scenario") {
    const auto sim = simulate(reference_scenario(LinkShape::linear, Family::gaussian, 2000, 77));
    FitConfig cfg;
    cfg.seed = 77;
    std::vector<double> losses;
    const auto res = fit(sim.data, cfg);
    const auto truth = reference_beta();
    for (std::size_t j = 0; j < 8; ++j) {
        INFO("beta " << j);
        CHECK(std::abs(res.params.beta[j] - truth[j]) < 0.1);
    }
    CHECK(std::abs(norm2(res.params.beta) - 1.0) < 1e-9);
    CHECK(res.params.beta[0] >= 0.0);
    CHECK(std::abs(evaluate_at(res.params.theta, res.params.mlp, 0.0)) <= 0.05);
    for (double l : res.loss_history) CHECK(std::isfinite(l));
    CHECK(res.loss_history.back() <= res.loss_history.front());
    CHECK(res.best_epoch >= 1);
    CHECK(res.stopped_epoch == res.loss_history.size());
}

TEST_CASE("fit is deterministic and warm start with zero epochs is a no-op") {
    const auto sim = simulate(reference_scenario(LinkShape::sigmoid, Family::gaussian, 300, 3));
    auto cfg = quick();
    cfg.seed = 12;
    const auto a = fit(sim.data, cfg);
    const auto b = fit(sim.data, cfg);
    CHECK(a.params == b.params);
    CHECK(a.loss_history == b.loss_history);

    auto zero = cfg;
    zero.epochs = 0;
    const auto c = fit(sim.data, zero, &a.params);
    CHECK(c.params == a.params);
    CHECK_THROWS_AS(fit(sim.data, zero), DomainError);
}

TEST_CASE("permuting exposure columns permutes beta") {
    const auto sim = simulate(reference_scenario(LinkShape::linear, Family::gaussian, 400, 5));
    auto cfg = quick();
    cfg.epochs = 15;
    cfg.early_stop_patience = 0;
    cfg.validation_fraction = 0.0;
    const std::vector<std::size_t> perm{0, 3, 1, 7, 2, 6, 5, 4}; // keeps coordinate 1
    Dataset d = sim.data;
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < 8; ++j) d.X(i, j) = sim.data.X(i, perm[j]);
    }
    const auto a = fit(sim.data, cfg);
    const auto b = fit(d, cfg);
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(b.params.beta[j] - a.params.beta[perm[j]]) < 1e-6);
}

TEST_CASE("every family trains and keeps the constraints") {
    for (Family f : {Family::binomial, Family::poisson, Family::cox}) {
        const auto sim = simulate(reference_scenario(LinkShape::linear, f, 400, 8));
        auto cfg = quick(f);
        cfg.seed = 2;
        const auto r = fit(sim.data, cfg);
        CHECK(std::abs(norm2(r.params.beta) - 1.0) < 1e-9);
        CHECK(r.params.beta[0] >= 0.0);
        for (double l : r.loss_history) CHECK(std::isfinite(l));
    }
}

TEST_CASE("fit errors") {
    auto sim = simulate(reference_scenario(LinkShape::linear, Family::poisson, 200, 1));
    auto cfg = quick(Family::poisson);
    cfg.learning_rate = 1e6;
    cfg.anchoring_weight = 0.0;
    CHECK_THROWS_AS(fit(sim.data, cfg), DivergenceError);

    Dataset empty;
    empty.X = Matrix(0, 8);
    empty.Z = Matrix(0, 1);
    CHECK_THROWS_AS(fit(empty, quick()), EmptyDataError);

    auto gauss = simulate(reference_scenario(LinkShape::linear, Family::gaussian, 50, 1));
    auto mismatch = quick(Family::binomial);
    CHECK_THROWS_AS(fit(gauss.data, mismatch), DomainError);
}

} // TEST_SUITE
