#pragma once

#include "plsinet/dataset.hpp"
#include "plsinet/neural_link.hpp"

#include <span>
#include <vector>

namespace plsinet {

/// A loss to minimise and its gradient with respect to each eta_i.
struct LossValue {
    double total = 0.0;
    std::vector<double> grad;
};

// All losses are (weighted) means so step sizes do not depend on n. An empty
// `weights` span means unit case weights.

/// Mean squared error.
LossValue loss_gaussian(std::span<const double> y, std::span<const double> eta,
                        std::span<const double> weights = {});

/// Mean Bernoulli negative log-likelihood under the logit link.
LossValue loss_binomial(std::span<const double> y, std::span<const double> eta,
                        std::span<const double> weights = {});

/// Mean Poisson negative log-likelihood under the log link, without log(y!).
LossValue loss_poisson(std::span<const double> y, std::span<const double> eta,
                       std::span<const double> weights = {});

/// Negative Cox partial log-likelihood per event, Breslow ties.
/// Risk set of event i is {j : time_j >= time_i}.
LossValue loss_cox(std::span<const double> time, std::span<const double> event,
                   std::span<const double> eta, std::span<const double> weights = {});

LossValue evaluate_loss(const Outcome& outcome, std::span<const double> eta,
                        std::span<const double> weights = {});

struct PenaltyValue {
    double value = 0.0;
    std::vector<double> grad_theta;
};

/// weight * g(0)^2, pinning the link at the origin.
PenaltyValue anchoring_penalty(const MlpParams& theta, const MlpSpec& spec, double weight);

} // namespace plsinet
