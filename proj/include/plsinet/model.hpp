#pragma once

#include "plsinet/family.hpp"
#include "plsinet/neural_link.hpp"
#include "plsinet/numerics.hpp"

#include <span>
#include <vector>

namespace plsinet {

/// (beta, gamma, theta) of the partial-linear single-index predictor
///   eta = g_theta(beta^T x) + gamma^T z.
/// beta is kept unit-norm with a positive leading coordinate.
struct ModelParams {
    std::vector<double> beta;
    std::vector<double> gamma;
    MlpSpec mlp;
    MlpParams theta;

    std::size_t p() const noexcept { return beta.size(); }
    std::size_t q() const noexcept { return gamma.size(); }

    /// Throws DomainError if the identifiability constraints are violated.
    void check_invariants(double tol = 1e-9) const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

std::vector<double> index(const ModelParams& params, const Matrix& X);

/// Linear predictor g(beta^T x_i) + gamma^T z_i.
std::vector<double> predict_eta(const ModelParams& params, const Matrix& X, const Matrix& Z);

struct Projection {
    std::vector<double> beta;
    bool flipped = false;
};

/// beta / ||beta|| with the sign chosen so that the first non-zero coordinate
/// is positive.
Projection project_identifiable(std::span<const double> beta);

/// Inverse link: identity, logistic or exp. Cox has no mean link.
std::vector<double> apply_mean_link(Family family, std::span<const double> eta);

} // namespace plsinet
