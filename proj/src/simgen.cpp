#include "plsinet/simgen.hpp"

#include "plsinet/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace plsinet {

std::string_view to_string(LinkShape l) noexcept {
    switch (l) {
    case LinkShape::linear: return "linear";
    case LinkShape::s_shape: return "s_shape";
    case LinkShape::sigmoid: return "sigmoid";
    }
    return "unknown";
}

LinkShape parse_link_shape(std::string_view name) {
    if (name == "linear") return LinkShape::linear;
    if (name == "s_shape" || name == "s-shape" || name == "sshape") return LinkShape::s_shape;
    if (name == "sigmoid") return LinkShape::sigmoid;
    throw DomainError("unknown link shape '" + std::string(name) + "'");
}

double eval_true_link(LinkShape shape, double s) {
    switch (shape) {
    case LinkShape::linear: return s;
    case LinkShape::s_shape: return 10.0 * (2.0 / (1.0 + std::exp(-s)) - 0.2 * s - 1.0);
    case LinkShape::sigmoid: return 5.0 * (1.0 / (1.0 + std::exp(-2.0 * s)) - 0.5);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> reference_beta(bool literal_norm) {
    std::vector<double> b{1.0, 0.7, -0.5, 0.5, 0.3, -0.1, 0.0, 0.0};
    const double divisor = literal_norm ? std::sqrt(1.84) : std::sqrt(2.09);
    for (double& v : b) v /= divisor;
    return b;
}

std::vector<double> reference_gamma() {
    return {1.0, 1.0, -0.5, 0.5};
}

void SimScenario::validate() const {
    if (n == 0) throw DomainError("scenario needs at least one observation");
    const double lower = -1.0 / static_cast<double>(kSimExposures - 1);
    if (!(rho > lower && rho < 1.0)) {
        throw DomainError("equicorrelation rho must lie in (-1/7, 1) for a positive definite "
                          "covariance; got " + std::to_string(rho));
    }
    if (beta_true.size() != kSimExposures) throw ShapeError("scenario beta must have 8 entries");
    if (gamma_true.size() != 4) throw ShapeError("scenario gamma must have 4 entries");
    if (!literal_norm && std::abs(norm2(beta_true) - 1.0) > 1e-9) {
        throw DomainError("scenario beta must be unit norm");
    }
}

std::vector<double> SimScenario::estimable_gamma() const {
    if (family == Family::cox) {
        return {gamma_true.begin() + 1, gamma_true.end()};
    }
    return gamma_true;
}

std::vector<std::string> SimScenario::gamma_names() const {
    if (family == Family::cox) return {"gamma1", "gamma2", "gamma3"};
    return {"intercept", "gamma1", "gamma2", "gamma3"};
}

SimScenario reference_scenario(LinkShape link, Family family, std::size_t n, std::uint64_t seed,
                               bool literal_norm) {
    SimScenario s;
    s.link = link;
    s.family = family;
    s.n = n;
    s.seed = seed;
    s.literal_norm = literal_norm;
    s.beta_true = reference_beta(literal_norm);
    return s;
}

Matrix gen_exposures(Rng& rng, std::size_t n, double rho) {
    const double lower = -1.0 / static_cast<double>(kSimExposures - 1);
    if (!(rho > lower && rho < 1.0)) {
        throw DomainError("equicorrelation rho must lie in (-1/7, 1); got " + std::to_string(rho));
    }
    Matrix cov(kSimExposures, kSimExposures, rho);
    for (std::size_t i = 0; i < kSimExposures; ++i) cov(i, i) = 1.0;
    const std::vector<double> zero(kSimExposures, 0.0);
    return mvn_sample(rng, zero, cholesky(cov), n);
}

namespace {

struct Design {
    Matrix X;
    Matrix Zfull; // with intercept column
    std::vector<double> index;
    std::vector<double> eta;
};

Design draw_design(Rng& rng, const SimScenario& sc, const SimHooks& hooks) {
    Design d;
    d.X = gen_exposures(rng, sc.n, sc.rho);
    d.Zfull = Matrix(sc.n, 4);
    for (std::size_t i = 0; i < sc.n; ++i) {
        d.Zfull(i, 0) = 1.0;
        d.Zfull(i, 1) = rng.normal();
        d.Zfull(i, 2) = rng.normal();
        d.Zfull(i, 3) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    d.index.resize(sc.n);
    d.eta.resize(sc.n);
    for (std::size_t i = 0; i < sc.n; ++i) {
        d.index[i] = dot(d.X.row(i), sc.beta_true);
        d.eta[i] = hooks.eta_override ? *hooks.eta_override
                                      : eval_true_link(sc.link, d.index[i]) +
                                            dot(d.Zfull.row(i), sc.gamma_true);
    }
    return d;
}

void require_family(const SimScenario& sc, Family expected) {
    sc.validate();
    if (sc.family != expected) {
        throw DomainError("scenario family '" + std::string(to_string(sc.family)) +
                          "' does not match generator for '" +
                          std::string(to_string(expected)) + "'");
    }
}

SimulatedData package(Design&& d, Outcome outcome, bool keep_intercept, std::string convention) {
    SimulatedData out;
    out.data.X = std::move(d.X);
    if (keep_intercept) {
        out.data.Z = std::move(d.Zfull);
    } else {
        out.data.Z = Matrix(out.data.X.rows(), 3);
        for (std::size_t i = 0; i < out.data.Z.rows(); ++i) {
            for (std::size_t k = 0; k < 3; ++k) out.data.Z(i, k) = d.Zfull(i, k + 1);
        }
    }
    out.data.outcome = std::move(outcome);
    out.index_true = std::move(d.index);
    out.eta_true = std::move(d.eta);
    out.convention = std::move(convention);
    return out;
}

// Expected fraction censored when T ~ Exp(rate) and C ~ U(0, c).
double expected_censoring(const std::vector<double>& rates, double c) {
    double acc = 0.0;
    for (double r : rates) {
        const double x = r * c;
        acc += x < 1e-12 ? 1.0 : -std::expm1(-x) / x;
    }
    return acc / static_cast<double>(rates.size());
}

} // namespace

SimulatedData gen_continuous(Rng& rng, const SimScenario& sc, const SimHooks& hooks) {
    require_family(sc, Family::gaussian);
    Design d = draw_design(rng, sc, hooks);
    Outcome o;
    o.family = Family::gaussian;
    o.y.resize(sc.n);
    for (std::size_t i = 0; i < sc.n; ++i) {
        o.y[i] = d.eta[i] + hooks.noise_scale * rng.normal();
    }
    return package(std::move(d), std::move(o), true, "paper");
}

SimulatedData gen_binary(Rng& rng, const SimScenario& sc, const SimHooks& hooks) {
    require_family(sc, Family::binomial);
    Design d = draw_design(rng, sc, hooks);
    Outcome o;
    o.family = Family::binomial;
    o.y.resize(sc.n);
    for (std::size_t i = 0; i < sc.n; ++i) {
        const double e = d.eta[i];
        const double prob = e >= 0.0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
        o.y[i] = rng.uniform() < prob ? 1.0 : 0.0;
    }
    return package(std::move(d), std::move(o), true, "synthetic-convention");
}

SimulatedData gen_count(Rng& rng, const SimScenario& sc, const SimHooks& hooks) {
    require_family(sc, Family::poisson);
    Design d = draw_design(rng, sc, hooks);
    Outcome o;
    o.family = Family::poisson;
    o.y.resize(sc.n);
    for (std::size_t i = 0; i < sc.n; ++i) {
        // Inversion by sequential search; deterministic given the uniform stream.
        const double mu = std::exp(d.eta[i]);
        const double u = rng.uniform();
        double k = 0.0;
        double pk = std::exp(-mu);
        double cdf = pk;
        while (u > cdf && pk > 0.0) {
            k += 1.0;
            pk *= mu / k;
            cdf += pk;
        }
        o.y[i] = k;
    }
    return package(std::move(d), std::move(o), true, "synthetic-convention");
}

double calibrate_censoring(const SimScenario& scenario, double target) {
    if (!(target > 0.0 && target < 1.0)) {
        throw DomainError("censoring target must lie in (0, 1)");
    }
    SimScenario ref = scenario;
    ref.n = 20000;
    ref.family = Family::cox;
    Rng rng(0x0C3A5u, 0x5EEDu);
    const Design d = draw_design(rng, ref, {});
    std::vector<double> rates(d.eta.size());
    for (std::size_t i = 0; i < rates.size(); ++i) rates[i] = std::exp(d.eta[i]);
    // Censoring fraction decreases in c; bisect on log c.
    double lo = -30.0;
    double hi = 30.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (expected_censoring(rates, std::exp(mid)) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::exp(0.5 * (lo + hi));
}

SimulatedData gen_survival(Rng& rng, const SimScenario& sc, const SimHooks& hooks) {
    require_family(sc, Family::cox);
    const double c0 = hooks.censoring ? calibrate_censoring(sc) : 0.0;
    Design d = draw_design(rng, sc, hooks);
    Outcome o;
    o.family = Family::cox;
    o.time.resize(sc.n);
    o.event.resize(sc.n);
    for (std::size_t i = 0; i < sc.n; ++i) {
        const double u = 1.0 - rng.uniform(); // (0, 1]
        const double t = -std::log(u) / std::exp(d.eta[i]);
        double c = std::numeric_limits<double>::infinity();
        if (hooks.censoring) {
            c = c0 * (1.0 - rng.uniform());
        }
        // Guard against a zero time from u == 1.
        const double observed = std::max(std::min(t, c), std::numeric_limits<double>::min());
        o.time[i] = observed;
        o.event[i] = t <= c ? 1.0 : 0.0;
    }
    auto out = package(std::move(d), std::move(o), false, "synthetic-convention");
    out.censoring_upper = c0;
    return out;
}

SimulatedData simulate(const SimScenario& scenario, const SimHooks& hooks) {
    Rng rng(scenario.seed);
    switch (scenario.family) {
    case Family::gaussian: return gen_continuous(rng, scenario, hooks);
    case Family::binomial: return gen_binary(rng, scenario, hooks);
    case Family::poisson: return gen_count(rng, scenario, hooks);
    case Family::cox: return gen_survival(rng, scenario, hooks);
    }
    throw UnsupportedFamilyError("unknown family");
}

} // namespace plsinet
