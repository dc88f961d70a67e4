#pragma once

#include "plsinet/family.hpp"
#include "plsinet/numerics.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace plsinet {

/// Response columns. Gaussian, binomial and poisson use `y`; cox uses
/// `time` and `event` (1 = observed, 0 = censored).
struct Outcome {
    Family family = Family::gaussian;
    std::vector<double> y;
    std::vector<double> time;
    std::vector<double> event;

    std::size_t size() const noexcept { return family == Family::cox ? time.size() : y.size(); }
    Outcome subset(std::span<const std::size_t> idx) const;
    /// Family-specific value checks; throws DomainError / ShapeError.
    void validate() const;
};

/// Exposures X (n x p), linear covariates Z (n x q) and the outcome.
/// `weights` is either empty (unit case weights) or of length n.
struct Dataset {
    Matrix X;
    Matrix Z;
    Outcome outcome;
    std::vector<double> weights;

    std::size_t n() const noexcept { return X.rows(); }
    std::size_t p() const noexcept { return X.cols(); }
    std::size_t q() const noexcept { return Z.cols(); }

    Dataset subset(std::span<const std::size_t> idx) const;
    void validate() const;
};

} // namespace plsinet
