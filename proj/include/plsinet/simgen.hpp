#pragma once

#include "plsinet/dataset.hpp"
#include "plsinet/family.hpp"
#include "plsinet/numerics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace plsinet {

enum class LinkShape { linear, s_shape, sigmoid };

std::string_view to_string(LinkShape l) noexcept;
LinkShape parse_link_shape(std::string_view name);

/// linear: s; s_shape: 10 (2 / (1 + e^-s) - 0.2 s - 1); sigmoid: 5 (1 / (1 + e^-2s) - 0.5).
double eval_true_link(LinkShape shape, double s);

constexpr std::size_t kSimExposures = 8;

/// Index direction (1, 0.7, -0.5, 0.5, 0.3, -0.1, 0, 0) divided by its
/// Euclidean norm sqrt(2.09). With `literal_norm` the divisor is sqrt(1.84),
/// which leaves the vector off the unit sphere.
std::vector<double> reference_beta(bool literal_norm = false);
/// (1, 1, -0.5, 0.5); the first entry is the intercept.
std::vector<double> reference_gamma();

struct SimScenario {
    LinkShape link = LinkShape::linear;
    Family family = Family::gaussian;
    std::size_t n = 2000;
    double rho = 0.3;
    std::vector<double> beta_true = reference_beta();
    std::vector<double> gamma_true = reference_gamma();
    std::uint64_t seed = 0;
    bool literal_norm = false;

    void validate() const;
    /// Rows/columns the generated covariate matrix carries. Cox data has no
    /// intercept column (it is absorbed by the baseline hazard).
    std::vector<double> estimable_gamma() const;
    std::vector<std::string> gamma_names() const;
};

SimScenario reference_scenario(LinkShape link, Family family, std::size_t n, std::uint64_t seed,
                               bool literal_norm = false);

/// Test hooks; defaults reproduce the standard generators.
struct SimHooks {
    double noise_scale = 1.0;               // gaussian error SD
    std::optional<double> eta_override;     // replaces every true eta
    bool censoring = true;                  // survival only
};

struct SimulatedData {
    Dataset data;
    std::vector<double> index_true;
    std::vector<double> eta_true;
    double censoring_upper = 0.0; // survival only
    /// "paper" for the continuous recipe, "synthetic-convention" otherwise.
    std::string convention;
};

/// n x 8 rows i.i.d. N(0, (1 - rho) I + rho J).
Matrix gen_exposures(Rng& rng, std::size_t n, double rho);

SimulatedData gen_continuous(Rng& rng, const SimScenario& scenario, const SimHooks& hooks = {});
SimulatedData gen_binary(Rng& rng, const SimScenario& scenario, const SimHooks& hooks = {});
SimulatedData gen_count(Rng& rng, const SimScenario& scenario, const SimHooks& hooks = {});
/// Exponential baseline (rate 1) event times, Uniform(0, c0) censoring with
/// c0 calibrated to an expected 25% censoring rate.
SimulatedData gen_survival(Rng& rng, const SimScenario& scenario, const SimHooks& hooks = {});

/// Dispatches on scenario.family using Rng(scenario.seed).
SimulatedData simulate(const SimScenario& scenario, const SimHooks& hooks = {});

/// Upper bound c0 of the uniform censoring distribution giving `target`
/// expected censoring for this scenario; bisection on a fixed reference sample.
double calibrate_censoring(const SimScenario& scenario, double target = 0.25);

} // namespace plsinet
