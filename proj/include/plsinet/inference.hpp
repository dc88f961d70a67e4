#pragma once

#include "plsinet/dataset.hpp"
#include "plsinet/model.hpp"
#include "plsinet/numerics.hpp"
#include "plsinet/trainer.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace plsinet {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Pointwise summary of replicate link curves on a grid of index values.
struct CurveBand {
    std::vector<double> grid;
    std::vector<double> fit;  // full-data g-hat; empty when not supplied
    std::vector<double> mean;
    std::vector<double> lo;
    std::vector<double> hi;
    double alpha = 0.05;
};

/// One refitted replicate, aligned to the full-data direction. `mirrored`
/// records that beta was sign-flipped by the alignment rule, in which case
/// the replicate link is read as g(-s).
struct ReplicateModel {
    std::size_t id = 0;
    ModelParams params;
    bool mirrored = false;
};

struct BootstrapOptions {
    std::size_t replicates = 100;
    double alpha = 0.05;
    /// Replicate b draws from rng.substream(b); a retry uses a child of that.
    Rng rng{0};
    bool warm_start = false;
    std::size_t jobs = 1; // 0 = hardware concurrency
    bool curve = true;
    std::optional<std::vector<double>> grid; // default: see default_grid
    std::function<void(std::size_t done, std::size_t total)> progress;
};

struct BootstrapResult {
    /// Successful replicates, one row each, columns beta_1..beta_p, gamma_1..gamma_q.
    Matrix replicates;
    std::vector<ReplicateModel> models;
    std::vector<double> point;
    std::vector<double> boot_mean;
    std::vector<double> se;
    std::vector<Interval> ci_normal;
    std::vector<Interval> ci_percentile;
    double alpha = 0.05;
    std::size_t requested = 0;
    std::size_t retried = 0;
    std::size_t dropped = 0;
    std::optional<CurveBand> curve_band;
};

/// Resample-and-refit bootstrap around an existing full-data fit.
/// Replicate fits that diverge (or draw no cox events) are retried once with
/// a fresh substream and then dropped; more than 20% drops is an
/// InferenceError. Results are ordered by replicate id whatever `jobs` is.
BootstrapResult bootstrap(const Dataset& data, const FitConfig& config, const ModelParams& point,
                          const BootstrapOptions& options);

/// Fits the full data first, then bootstraps around that fit.
BootstrapResult bootstrap(const Dataset& data, const FitConfig& config,
                          const BootstrapOptions& options);

/// SE, normal and percentile intervals from a replicate matrix.
void summarize_replicates(BootstrapResult& result);

/// project_identifiable, except that a leading coordinate within `tie_tol`
/// of zero takes the sign that agrees with `beta_point`.
Projection align_replicate(std::span<const double> beta_rep, std::span<const double> beta_point,
                           double tie_tol = 1e-12);

/// 201 equispaced points spanning the 0.5% and 99.5% quantiles of the fitted
/// index on X.
std::vector<double> default_grid(const ModelParams& point, const Matrix& X,
                                 std::size_t points = 201);

CurveBand curve_band(std::span<const ReplicateModel> replicates, std::span<const double> grid,
                     double alpha);

} // namespace plsinet
