#pragma once

#include "plsinet/dataset.hpp"
#include "plsinet/io.hpp"
#include "plsinet/trainer.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace plsinet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Process-wide switches set by main / replay.
struct RunContext {
    std::vector<std::string> argv; // without program name
    bool env_seed_allowed = true;
};

struct SeedChoice {
    std::uint64_t value = 0;
    std::string source; // "flag", "PLSI_SEED" or "default"
};

/// PLSI_SEED, when set and allowed, overrides the flag value.
SeedChoice resolve_seed(const CLI::Option* flag, std::uint64_t flag_value,
                        const RunContext& ctx);

/// Fit hyperparameter flags shared by fit, bootstrap and mcstudy.
class FitFlags {
public:
    void attach(CLI::App& app, bool with_family = true);
    /// `base` (or the defaults), then --fit-config JSON, then explicitly given flags.
    FitConfig build(const FitConfig* base = nullptr) const;

private:
    FitConfig defaults_;
    std::string family_ = "gaussian";
    std::string hidden_ = "64,64";
    std::string activation_ = "tanh";
    std::string beta_init_ = "linear_projection";
    std::string cox_batching_ = "risk_set_minibatch";
    std::string intercept_init_ = "null_model";
    std::string config_file_;
    bool no_flip_momentum_ = false;
    FitConfig values_;
    std::vector<std::pair<CLI::Option*, std::string>> opts_;
};

/// Column roles for reading a dataset from CSV. Entries are comma separated;
/// a trailing '*' matches every header name with that prefix.
struct ColumnFlags {
    std::string exposures = "x*";
    std::string covariates = "z*";
    std::string outcome = "y";
    std::string time = "time";
    std::string event = "event";
    std::string weights;
    bool no_intercept = false;

    void attach(CLI::App& app);
};

struct LoadedData {
    Dataset data;
    std::vector<std::string> exposures;
    std::vector<std::string> covariates; // includes "intercept" when added
    bool intercept = false;
    std::vector<double> x_mean;
    std::vector<double> x_sd;
};

std::vector<std::string> expand_columns(const std::string& spec, const CsvTable& table,
                                        const std::vector<std::string>& exclude);

/// Reads the CSV, resolves roles and builds the dataset. With `standardize`
/// the exposures are centred and scaled; `reuse` supplies means/SDs from a
/// checkpoint instead of computing them.
LoadedData load_dataset(const fs::path& path, const ColumnFlags& cols, Family family,
                        bool standardize, const Checkpoint* reuse = nullptr);

/// Applies a checkpoint's column layout and standardization to new data.
LoadedData load_for_checkpoint(const fs::path& path, const Checkpoint& ckpt, Family family,
                               bool need_outcome, const ColumnFlags& cols);

class Manifest {
public:
    Manifest(std::string command, const RunContext& ctx);
    void set(const std::string& key, json value) { body_[key] = std::move(value); }
    json& at(const std::string& key) { return body_[key]; }
    void input(const fs::path& path);
    /// Writes the file and records its digest.
    void output(const fs::path& dir, const std::string& name, const std::string& content);
    void output_existing(const fs::path& dir, const std::string& name);
    void write(const fs::path& dir);

private:
    json body_;
    std::chrono::steady_clock::time_point start_;
};

void write_table(Manifest& m, const fs::path& dir, const std::string& stem, const TextTable& t);

std::string fixed(double v, int decimals = 4);

} // namespace plsinet::cli
