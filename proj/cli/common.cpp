#include "common.hpp"

#include "plsinet/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <set>

namespace plsinet::cli {

SeedChoice resolve_seed(const CLI::Option* flag, std::uint64_t flag_value, const RunContext& ctx) {
    SeedChoice s{flag_value, flag != nullptr && flag->count() > 0 ? "flag" : "default"};
    if (!ctx.env_seed_allowed) return s;
    if (const char* env = std::getenv("PLSI_SEED"); env != nullptr && *env != '\0') {
        std::uint64_t v = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto res = std::from_chars(env, end, v);
        if (res.ec != std::errc() || res.ptr != end) {
            throw ArgumentError(std::string("PLSI_SEED must be an unsigned 64-bit integer, got '") +
                                env + "'");
        }
        s = {v, "PLSI_SEED"};
    }
    return s;
}

// ---- fit flags --------------------------------------------------------------

void FitFlags::attach(CLI::App& app, bool with_family) {
    values_ = defaults_;
    auto reg = [&](CLI::Option* o, const std::string& key) { opts_.emplace_back(o, key); };
    if (with_family) {
        reg(app.add_option("--family", family_, "Outcome family: gaussian, binomial, poisson, cox")
                ->capture_default_str(),
            "family");
    }
    reg(app.add_option("--hidden", hidden_, "Hidden layer widths, comma separated")
            ->capture_default_str(),
        "hidden");
    reg(app.add_option("--activation", activation_, "relu, tanh or softplus")->capture_default_str(),
        "activation");
    reg(app.add_option("--epochs", values_.epochs, "Maximum training epochs")->capture_default_str(),
        "epochs");
    reg(app.add_option("--batch-size", values_.batch_size, "Minibatch size")->capture_default_str(),
        "batch_size");
    reg(app.add_option("--lr", values_.learning_rate, "Adam learning rate")->capture_default_str(),
        "learning_rate");
    reg(app.add_option("--adam-beta1", values_.adam_betas[0])->capture_default_str(), "adam_beta1");
    reg(app.add_option("--adam-beta2", values_.adam_betas[1])->capture_default_str(), "adam_beta2");
    reg(app.add_option("--adam-eps", values_.adam_eps)->capture_default_str(), "adam_eps");
    reg(app.add_option("--anchoring-weight", values_.anchoring_weight,
                       "Weight of the g(0)^2 anchoring penalty")
            ->capture_default_str(),
        "anchoring_weight");
    reg(app.add_option("--index-centering-weight", values_.index_centering_weight,
                       "Weight of the mean squared index penalty")
            ->capture_default_str(),
        "index_centering_weight");
    reg(app.add_option("--patience", values_.early_stop_patience,
                       "Early-stopping patience in epochs (0 disables)")
            ->capture_default_str(),
        "early_stop_patience");
    reg(app.add_option("--validation-fraction", values_.validation_fraction,
                       "Share of rows held out for early stopping")
            ->capture_default_str(),
        "validation_fraction");
    reg(app.add_option("--beta-init", beta_init_, "uniform_simplex_direction, random_sphere or linear_projection")
            ->capture_default_str(),
        "beta_init");
    reg(app.add_option("--cox-batching", cox_batching_, "risk_set_minibatch or full")
            ->capture_default_str(),
        "cox_batching");
    reg(app.add_option("--intercept-init", intercept_init_, "null_model or zero")
            ->capture_default_str(),
        "intercept_init");
    reg(app.add_flag("--no-flip-momentum", no_flip_momentum_,
                     "Keep the Adam first moment of beta when beta is sign-flipped"),
        "flip_momentum");
    app.add_option("--fit-config", config_file_, "JSON file with fit settings (flags override)")
        ->check(CLI::ExistingFile);
}

FitConfig FitFlags::build(const FitConfig* base) const {
    FitConfig c = base != nullptr ? *base : defaults_;
    if (!config_file_.empty()) {
        try {
            c = fit_config_from_json(json::parse(read_text(config_file_)));
        } catch (const json::exception& e) {
            throw ArgumentError("fit config '" + config_file_ + "': " + e.what());
        } catch (const DomainError& e) {
            throw ArgumentError("fit config '" + config_file_ + "': " + e.what());
        }
    }
    for (const auto& [opt, key] : opts_) {
        if (opt->count() == 0) continue;
        try {
            if (key == "family") c.family = parse_family(family_);
            else if (key == "hidden") {
                c.mlp.hidden.clear();
                for (const auto& w : CLI::detail::split(hidden_, ',')) {
                    std::size_t v = 0;
                    const auto res = std::from_chars(w.data(), w.data() + w.size(), v);
                    if (res.ec != std::errc() || res.ptr != w.data() + w.size()) {
                        throw ArgumentError("--hidden expects comma separated integers, got '" +
                                            hidden_ + "'");
                    }
                    c.mlp.hidden.push_back(v);
                }
            } else if (key == "activation") c.mlp.activation = parse_activation(activation_);
            else if (key == "epochs") c.epochs = values_.epochs;
            else if (key == "batch_size") c.batch_size = values_.batch_size;
            else if (key == "learning_rate") c.learning_rate = values_.learning_rate;
            else if (key == "adam_beta1") c.adam_betas[0] = values_.adam_betas[0];
            else if (key == "adam_beta2") c.adam_betas[1] = values_.adam_betas[1];
            else if (key == "adam_eps") c.adam_eps = values_.adam_eps;
            else if (key == "anchoring_weight") c.anchoring_weight = values_.anchoring_weight;
            else if (key == "index_centering_weight") {
                c.index_centering_weight = values_.index_centering_weight;
            } else if (key == "early_stop_patience") {
                c.early_stop_patience = values_.early_stop_patience;
            } else if (key == "validation_fraction") {
                c.validation_fraction = values_.validation_fraction;
            } else if (key == "beta_init") c.beta_init = parse_beta_init(beta_init_);
            else if (key == "cox_batching") c.cox_batching = parse_cox_batching(cox_batching_);
            else if (key == "intercept_init") c.intercept_init = parse_intercept_init(intercept_init_);
            else if (key == "flip_momentum") c.flip_momentum = !no_flip_momentum_;
        } catch (const DomainError& e) {
            throw ArgumentError(e.what());
        }
    }
    try {
        c.validate();
    } catch (const DomainError& e) {
        throw ArgumentError(e.what());
    }
    return c;
}

// ---- columns ----------------------------------------------------------------

void ColumnFlags::attach(CLI::App& app) {
    app.add_option("--exposures", exposures,
                   "Exposure columns (comma list; 'x*' matches by prefix)")
        ->capture_default_str();
    app.add_option("--covariates", covariates, "Linear covariate columns; empty for none")
        ->capture_default_str();
    app.add_option("--outcome", outcome, "Outcome column (gaussian, binomial, poisson)")
        ->capture_default_str();
    app.add_option("--time", time, "Survival time column (cox)")->capture_default_str();
    app.add_option("--event", event, "Event indicator column (cox, 1 = observed)")
        ->capture_default_str();
    app.add_option("--weights", weights, "Optional case-weight column");
    app.add_flag("--no-intercept", no_intercept,
                 "Do not add a constant covariate (never added for cox)");
}

std::vector<std::string> expand_columns(const std::string& spec, const CsvTable& table,
                                        const std::vector<std::string>& exclude) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto item : CLI::detail::split(spec, ',')) {
        CLI::detail::trim(item);
        if (item.empty()) continue;
        std::vector<std::string> hits;
        if (item.back() == '*') {
            const auto prefix = item.substr(0, item.size() - 1);
            for (const auto& h : table.header) {
                const bool excluded =
                    std::find(exclude.begin(), exclude.end(), h) != exclude.end();
                if (h.rfind(prefix, 0) == 0 && !excluded) hits.push_back(h);
            }
        } else {
            table.column_index(item);
            hits.push_back(item);
        }
        for (auto& h : hits) {
            if (seen.insert(h).second) out.push_back(std::move(h));
        }
    }
    return out;
}

namespace {

Matrix gather(const CsvTable& t, const std::vector<std::string>& names) {
    Matrix m(t.rows.size(), names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const std::size_t c = t.column_index(names[j]);
        for (std::size_t i = 0; i < t.rows.size(); ++i) m(i, j) = t.rows[i][c];
    }
    return m;
}

void standardize_columns(Matrix& X, const std::vector<double>& mu, const std::vector<double>& sd) {
    for (std::size_t i = 0; i < X.rows(); ++i) {
        for (std::size_t j = 0; j < X.cols(); ++j) X(i, j) = (X(i, j) - mu[j]) / sd[j];
    }
}

LoadedData assemble(const CsvTable& t, const fs::path& path, const std::vector<std::string>& xs,
                    const std::vector<std::string>& zs, bool intercept, Family family,
                    const ColumnFlags& cols, bool need_outcome) {
    if (xs.empty()) {
        throw ArgumentError(path.string() + ": no exposure columns matched '" + cols.exposures + "'");
    }
    if (t.rows.empty()) throw EmptyDataError(path.string() + ": no data rows");
    LoadedData d;
    d.exposures = xs;
    d.intercept = intercept;
    d.data.X = gather(t, xs);
    Matrix Zraw = gather(t, zs);
    const std::size_t n = t.rows.size();
    d.data.Z = Matrix(n, zs.size() + (intercept ? 1 : 0));
    if (intercept) d.covariates.push_back("intercept");
    for (const auto& z : zs) d.covariates.push_back(z);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        if (intercept) d.data.Z(i, k++) = 1.0;
        for (std::size_t j = 0; j < zs.size(); ++j) d.data.Z(i, k++) = Zraw(i, j);
    }
    d.data.outcome.family = family;
    if (need_outcome) {
        if (family == Family::cox) {
            d.data.outcome.time = t.column(cols.time);
            d.data.outcome.event = t.column(cols.event);
        } else {
            d.data.outcome.y = t.column(cols.outcome);
        }
    } else if (family == Family::cox) {
        d.data.outcome.time.assign(n, 1.0);
        d.data.outcome.event.assign(n, 0.0);
    } else {
        d.data.outcome.y.assign(n, 0.0);
    }
    if (!cols.weights.empty()) d.data.weights = t.column(cols.weights);
    return d;
}

std::vector<std::string> role_columns(const ColumnFlags& cols, Family family) {
    std::vector<std::string> r;
    if (family == Family::cox) {
        r = {cols.time, cols.event};
    } else {
        r = {cols.outcome};
    }
    if (!cols.weights.empty()) r.push_back(cols.weights);
    return r;
}

} // namespace

LoadedData load_dataset(const fs::path& path, const ColumnFlags& cols, Family family,
                        bool standardize, const Checkpoint* reuse) {
    const CsvTable t = read_csv(path);
    const auto roles = role_columns(cols, family);
    const auto xs = expand_columns(cols.exposures, t, roles);
    auto exclude = roles;
    exclude.insert(exclude.end(), xs.begin(), xs.end());
    const auto zs = expand_columns(cols.covariates, t, exclude);
    for (const auto& x : xs) {
        if (std::find(roles.begin(), roles.end(), x) != roles.end()) {
            throw ArgumentError("column '" + x + "' cannot be both an exposure and an outcome");
        }
    }
    const bool intercept = !cols.no_intercept && family != Family::cox;
    LoadedData d = assemble(t, path, xs, zs, intercept, family, cols, true);
    d.data.validate();
    if (reuse != nullptr) {
        if (reuse->exposures != d.exposures || reuse->covariates != d.covariates) {
            throw ArgumentError("data columns do not match the checkpoint's exposure/covariate layout");
        }
        d.x_mean = reuse->x_mean;
        d.x_sd = reuse->x_sd;
    } else if (standardize) {
        for (std::size_t j = 0; j < d.data.p(); ++j) {
            const auto col = d.data.X.column(j);
            const double m = mean(col);
            const double s = sample_sd(col);
            if (!(s > 0.0)) {
                throw DomainError("exposure '" + xs[j] +
                                  "' is constant and cannot be standardized (use --no-standardize)");
            }
            d.x_mean.push_back(m);
            d.x_sd.push_back(s);
        }
    }
    if (!d.x_mean.empty()) standardize_columns(d.data.X, d.x_mean, d.x_sd);
    return d;
}

LoadedData load_for_checkpoint(const fs::path& path, const Checkpoint& ckpt, Family family,
                               bool need_outcome, const ColumnFlags& cols) {
    const CsvTable t = read_csv(path);
    std::vector<std::string> zs;
    for (const auto& z : ckpt.covariates) {
        if (z != "intercept" || !ckpt.intercept) zs.push_back(z);
    }
    LoadedData d = assemble(t, path, ckpt.exposures, zs, ckpt.intercept, family, cols, need_outcome);
    if (need_outcome) d.data.validate();
    d.x_mean = ckpt.x_mean;
    d.x_sd = ckpt.x_sd;
    if (!d.x_mean.empty()) standardize_columns(d.data.X, d.x_mean, d.x_sd);
    return d;
}

// ---- manifest -------------------------------------------------------------

Manifest::Manifest(std::string command, const RunContext& ctx)
    : start_(std::chrono::steady_clock::now()) {
    body_["tool"] = "plsinet";
    body_["version"] = PLSINET_VERSION;
    body_["command"] = std::move(command);
    body_["argv"] = ctx.argv;
    body_["prng"] = "philox4x32-10";
    body_["inputs"] = json::array();
    body_["outputs"] = json::array();
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    body_["timings"]["started_utc"] = buf;
}

void Manifest::input(const fs::path& path) {
    body_["inputs"].push_back(
        {{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha256_hex(path)}});
}

void Manifest::output(const fs::path& dir, const std::string& name, const std::string& content) {
    write_text(dir / name, content);
    body_["outputs"].push_back({{"path", name}, {"sha256", sha256_hex_bytes(content)}});
}

void Manifest::output_existing(const fs::path& dir, const std::string& name) {
    body_["outputs"].push_back({{"path", name}, {"sha256", sha256_hex(dir / name)}});
}

void Manifest::write(const fs::path& dir) {
    body_["timings"]["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text(dir / "manifest.json", body_.dump(2) + "\n");
}

void write_table(Manifest& m, const fs::path& dir, const std::string& stem, const TextTable& t) {
    m.output(dir, stem + ".txt", t.aligned());
    m.output(dir, stem + ".csv", t.csv());
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

} // namespace plsinet::cli
