#include "plsinet/model.hpp"

#include "plsinet/errors.hpp"

#include <cmath>
#include <string>

namespace plsinet {

void ModelParams::check_invariants(double tol) const {
    if (beta.empty()) {
        throw DomainError("index direction is empty");
    }
    const double nrm = norm2(beta);
    if (std::abs(nrm - 1.0) > tol) {
        throw DomainError("index direction norm is " + std::to_string(nrm) + ", expected 1");
    }
    if (beta[0] < 0.0) {
        throw DomainError("index direction has a negative leading coordinate");
    }
    if (theta.flat.size() != mlp.param_count()) {
        throw ShapeError("network parameters do not match the network spec");
    }
}

std::vector<double> index(const ModelParams& params, const Matrix& X) {
    if (X.cols() != params.p()) {
        throw ShapeError("exposure matrix has " + std::to_string(X.cols()) + " columns, beta has " +
                         std::to_string(params.p()));
    }
    std::vector<double> s(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        s[i] = dot(X.row(i), params.beta);
    }
    return s;
}

std::vector<double> predict_eta(const ModelParams& params, const Matrix& X, const Matrix& Z) {
    if (Z.cols() != params.q() || Z.rows() != X.rows()) {
        throw ShapeError("covariate matrix shape " + std::to_string(Z.rows()) + "x" +
                         std::to_string(Z.cols()) + " is inconsistent with the model");
    }
    const auto s = index(params, X);
    auto eta = evaluate(params.theta, params.mlp, s);
    for (std::size_t i = 0; i < eta.size(); ++i) {
        eta[i] += dot(Z.row(i), params.gamma);
    }
    return eta;
}

Projection project_identifiable(std::span<const double> beta) {
    const double nrm = norm2(beta);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        throw DegenerateDirectionError("cannot normalise a zero or non-finite index direction");
    }
    Projection out;
    out.beta.assign(beta.begin(), beta.end());
    for (double v : out.beta) {
        if (v != 0.0) {
            out.flipped = v < 0.0;
            break;
        }
    }
    const double scale = out.flipped ? -1.0 / nrm : 1.0 / nrm;
    for (double& v : out.beta) {
        v *= scale;
    }
    return out;
}

std::vector<double> apply_mean_link(Family family, std::span<const double> eta) {
    std::vector<double> mu(eta.begin(), eta.end());
    switch (family) {
    case Family::gaussian:
        break;
    case Family::binomial:
        for (double& v : mu) {
            v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        }
        break;
    case Family::poisson:
        for (double& v : mu) {
            v = std::exp(v);
        }
        break;
    case Family::cox:
        throw UnsupportedFamilyError("the cox family has no mean link");
    }
    return mu;
}

} // namespace plsinet
