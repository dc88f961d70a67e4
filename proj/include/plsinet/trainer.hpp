#pragma once

#include "plsinet/dataset.hpp"
#include "plsinet/model.hpp"
#include "plsinet/neural_link.hpp"
#include "plsinet/numerics.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace plsinet {

enum class BetaInit { uniform_simplex_direction, random_sphere, linear_projection };

/// How cox minibatches are formed. `full` uses the whole training set for
/// every step; `risk_set_minibatch` samples subjects and builds risk sets
/// inside the sampled batch.
enum class CoxBatching { full, risk_set_minibatch };

/// Starting value for the coefficient of a constant-one column of Z; all
/// other gamma entries start at zero.
enum class InterceptInit { zero, null_model };

std::string_view to_string(BetaInit b) noexcept;
std::string_view to_string(InterceptInit i) noexcept;
InterceptInit parse_intercept_init(std::string_view name);
BetaInit parse_beta_init(std::string_view name);
std::string_view to_string(CoxBatching b) noexcept;
CoxBatching parse_cox_batching(std::string_view name);

struct FitConfig {
    Family family = Family::gaussian;
    MlpSpec mlp;
    std::size_t epochs = 500;
    std::size_t batch_size = 64; // clamped to the training-set size
    double learning_rate = 1e-3;
    std::array<double, 2> adam_betas{0.9, 0.999};
    double adam_eps = 1e-8;
    double anchoring_weight = 10.0;
    double index_centering_weight = 0.0;
    std::size_t early_stop_patience = 20; // 0 disables early stopping
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
    bool flip_momentum = true;
    BetaInit beta_init = BetaInit::linear_projection;
    CoxBatching cox_batching = CoxBatching::risk_set_minibatch;
    InterceptInit intercept_init = InterceptInit::null_model;

    void validate() const;
};

struct EpochReport {
    std::size_t epoch;
    double train_loss;
    double validation_loss; // NaN without a validation split
};

using ProgressCallback = std::function<void(const EpochReport&)>;

struct FitResult {
    ModelParams params;
    std::vector<double> loss_history;
    std::vector<double> validation_history;
    std::size_t stopped_epoch = 0;
    std::size_t best_epoch = 0;
    std::size_t flips = 0;
    FitConfig config;
};

/// Full penalised objective on one batch and its gradients. grad_beta is the
/// ambient gradient, before any projection.
struct ObjectiveValue {
    double value = 0.0;
    double loss = 0.0;
    std::vector<double> grad_gamma;
    std::vector<double> grad_beta;
    std::vector<double> grad_theta;
};

ObjectiveValue evaluate_objective(const ModelParams& params, const Dataset& batch,
                                  const FitConfig& config);

struct AdamState {
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, std::array<double, 2> betas, double eps);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffle_epoch(Rng& rng, std::size_t n);

/// Unit-norm starting direction with a positive leading coordinate.
/// linear_projection needs the data and is resolved inside fit; here it
/// yields the uniform direction, which fit also uses as its fallback.
std::vector<double> initial_beta(std::size_t p, BetaInit how, Rng& rng);

/// Joint minibatch Adam optimisation of (beta, gamma, theta). After every
/// step beta is sign-flipped if its first coordinate is negative and
/// renormalised. With early stopping the best-validation parameters are
/// returned. Throws DivergenceError on a non-finite objective.
FitResult fit(const Dataset& data, const FitConfig& config,
              const ModelParams* warm_start = nullptr, const ProgressCallback& progress = {});

} // namespace plsinet
