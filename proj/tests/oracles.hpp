#pragma once

// Independent reference implementations used only by tests. None of these
// call into the code they check, except for shared plain types.

#include "plsinet/dataset.hpp"
#include "plsinet/model.hpp"
#include "plsinet/trainer.hpp"

#include <functional>
#include <span>
#include <vector>

namespace oracle {

using plsinet::Dataset;
using plsinet::Matrix;
using plsinet::MlpSpec;
using plsinet::ModelParams;

/// Direct scalar evaluation of the network, one input at a time.
double mlp_value(const std::vector<double>& flat, const MlpSpec& spec, double s);

double loss_gaussian(std::span<const double> y, std::span<const double> eta,
                     std::span<const double> w = {});
double loss_binomial(std::span<const double> y, std::span<const double> eta,
                     std::span<const double> w = {});
double loss_poisson(std::span<const double> y, std::span<const double> eta,
                    std::span<const double> w = {});

struct CoxBrute {
    double total;
    std::vector<double> grad;
};
/// O(n^2) partial likelihood with Breslow ties and its closed-form gradient.
CoxBrute cox_brute(std::span<const double> time, std::span<const double> event,
                   std::span<const double> eta, std::span<const double> w = {});

/// Penalised objective evaluated from scratch.
double objective(const ModelParams& params, const Dataset& data, const plsinet::FitConfig& config);

/// Central difference of f at x along every coordinate.
std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, double h);

/// max_k |a_k - b_k| / max(1, |b_k|) with a floor that ignores round-off noise
/// in near-zero coordinates.
double rel_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

struct Ols {
    std::vector<double> coef;
    std::vector<double> se;
    double sigma2;
};
/// Least squares of y on the columns of D (no implicit intercept).
Ols ols(const Matrix& D, std::span<const double> y);

/// Heteroskedasticity-robust (HC0 sandwich) standard errors for the same fit.
std::vector<double> sandwich_se(const Matrix& D, std::span<const double> y);

/// [X | Z] side by side.
Matrix hstack(const Matrix& a, const Matrix& b);

} // namespace oracle
