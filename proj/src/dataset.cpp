#include "plsinet/dataset.hpp"

#include "plsinet/errors.hpp"

#include <cmath>
#include <string>

namespace plsinet {

namespace {

std::vector<double> pick(const std::vector<double>& v, std::span<const std::size_t> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        out.push_back(v[i]);
    }
    return out;
}

} // namespace

Outcome Outcome::subset(std::span<const std::size_t> idx) const {
    Outcome o;
    o.family = family;
    if (family == Family::cox) {
        o.time = pick(time, idx);
        o.event = pick(event, idx);
    } else {
        o.y = pick(y, idx);
    }
    return o;
}

void Outcome::validate() const {
    if (family == Family::cox) {
        if (!y.empty() || time.size() != event.size()) {
            throw ShapeError("cox outcome needs matching time and event columns and no y");
        }
        for (std::size_t i = 0; i < time.size(); ++i) {
            if (!(time[i] > 0.0) || !std::isfinite(time[i])) {
                throw DomainError("survival time at row " + std::to_string(i) +
                                  " must be positive and finite");
            }
            if (event[i] != 0.0 && event[i] != 1.0) {
                throw DomainError("event indicator at row " + std::to_string(i) +
                                  " must be 0 or 1");
            }
        }
        return;
    }
    if (!time.empty() || !event.empty()) {
        throw ShapeError(std::string(to_string(family)) + " outcome must not carry time/event");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = y[i];
        if (!std::isfinite(v)) {
            throw DomainError("outcome at row " + std::to_string(i) + " is not finite");
        }
        if (family == Family::binomial && v != 0.0 && v != 1.0) {
            throw DomainError("binomial outcome must be 0 or 1; row " + std::to_string(i) +
                              " has " + std::to_string(v));
        }
        if (family == Family::poisson && (v < 0.0 || v != std::floor(v))) {
            throw DomainError("poisson outcome must be a non-negative integer; row " +
                              std::to_string(i) + " has " + std::to_string(v));
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    Dataset d;
    d.X = X.select_rows(idx);
    d.Z = Z.select_rows(idx);
    d.outcome = outcome.subset(idx);
    if (!weights.empty()) {
        d.weights = pick(weights, idx);
    }
    return d;
}

void Dataset::validate() const {
    if (X.rows() == 0) {
        throw EmptyDataError("dataset has no observations");
    }
    if (X.cols() == 0) {
        throw ShapeError("dataset needs at least one exposure column");
    }
    if (Z.rows() != X.rows()) {
        throw ShapeError("covariate matrix has " + std::to_string(Z.rows()) + " rows, exposures " +
                         std::to_string(X.rows()));
    }
    if (outcome.size() != X.rows()) {
        throw ShapeError("outcome length " + std::to_string(outcome.size()) +
                         " does not match " + std::to_string(X.rows()) + " rows");
    }
    if (!weights.empty() && weights.size() != X.rows()) {
        throw ShapeError("case weight length does not match row count");
    }
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw DomainError("case weights must be finite and non-negative");
        }
    }
    for (double v : X.data()) {
        if (!std::isfinite(v)) throw DomainError("exposure matrix contains non-finite values");
    }
    for (double v : Z.data()) {
        if (!std::isfinite(v)) throw DomainError("covariate matrix contains non-finite values");
    }
    outcome.validate();
}

} // namespace plsinet
