#pragma once

#include "plsinet/simgen.hpp"
#include "plsinet/trainer.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace plsinet {

struct CellSpec {
    SimScenario scenario;
    std::size_t replicates = 50; // R
    std::size_t bootstrap = 100; // B
    double alpha = 0.05;
    FitConfig config;
    std::uint64_t seed = 0;
    bool warm_start = false;
    std::size_t jobs = 1;
};

/// Per-replicate record; the raw dump that every metric is computed from.
struct ReplicateEstimate {
    std::size_t replicate = 0;
    std::uint64_t data_seed = 0;
    bool ok = false;
    std::string failure;
    std::vector<double> estimate;
    std::vector<double> se;
    std::vector<double> ci_lo;
    std::vector<double> ci_hi;
    std::vector<double> pct_lo;
    std::vector<double> pct_hi;
    double g0 = 0.0; // fitted g(0) of the full-data fit
    double boot_g0_max = 0.0; // largest |g(0)| over the bootstrap refits; not serialized
};

struct MetricRow {
    std::string parameter;
    double truth = 0.0;
    double bias = 0.0;
    double sd = 0.0;
    double se_mean = 0.0;
    double cp = 0.0;
    double cp_percentile = 0.0;
};

struct MetricTable {
    std::string link;
    std::string family;
    std::size_t n = 0;
    double rho = 0.0;
    std::size_t replicates = 0;
    std::size_t bootstrap = 0;
    double alpha = 0.05;
    std::size_t failed = 0;
    std::uint64_t seed = 0;
    std::string convention;
    std::vector<MetricRow> rows;
};

struct CellResult {
    MetricTable table;
    std::vector<ReplicateEstimate> raw;
};

/// Parameter names in table order: beta1..beta_p, then the scenario's gamma names.
std::vector<std::string> parameter_names(const SimScenario& scenario);
std::vector<double> parameter_truth(const SimScenario& scenario);

/// Replicate r simulates from Rng(seed).substream(r); its bootstrap draws
/// from the nested substream (seed, r, 2, b). Failed replicates are counted
/// and excluded; fewer than two successes is an InferenceError.
CellResult run_cell(const CellSpec& spec,
                    const std::function<void(std::size_t done, std::size_t total)>& progress = {});

/// Bias, SD, mean SE and coverage from raw records.
MetricTable compute_metrics(const std::vector<ReplicateEstimate>& raw,
                            const std::vector<std::string>& names,
                            const std::vector<double>& truth);

struct FormattedTable {
    std::string text; // fixed width, 4 decimals
    std::string csv;  // full precision
};

FormattedTable format_table(const MetricTable& table);
/// Rows from the CSV twin written by format_table.
std::vector<MetricRow> parse_table_csv(const std::string& csv);
/// Long-format dump: one line per (replicate, parameter).
std::string format_raw_csv(const std::vector<ReplicateEstimate>& raw,
                           const std::vector<std::string>& names);

} // namespace plsinet
