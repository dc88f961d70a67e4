#include "app.hpp"

#include "common.hpp"

#include "plsinet/errors.hpp"
#include "plsinet/inference.hpp"
#include "plsinet/mcstudy.hpp"
#include "plsinet/parallel.hpp"
#include "plsinet/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

namespace plsinet::cli {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xB0075u;

const char* kPrngNote =
    "Randomness: every draw comes from Philox4x32-10 (Salmon et al. counter-based\n"
    "generator, 10 rounds). The 64-bit seed is the key; the 128-bit counter holds a\n"
    "64-bit block index and a 64-bit stream id, so (seed, stream) pairs give\n"
    "non-overlapping substreams. Normals use Box-Muller, bounded integers use\n"
    "Lemire's method. Results are bit-reproducible for a given seed and build.\n"
    "The environment variable PLSI_SEED, when set, overrides --seed.\n\n"
    "Exit status: 0 ok, 2 argument error, 3 data error, 4 numerical divergence,\n"
    "5 inference failure.";

void progress_line(bool verbose, const std::string& what, std::size_t done, std::size_t total) {
    if (verbose) std::cerr << what << ' ' << done << '/' << total << '\n';
}

fs::path sidecar_for(const fs::path& data) {
    fs::path p = data;
    p.replace_extension(".meta.json");
    return p;
}

json checkpoint_config(const Checkpoint& c) {
    return c.extra.contains("config") ? c.extra["config"] : json();
}

TextTable coefficient_table(const ModelParams& m, const std::vector<std::string>& xs,
                            const std::vector<std::string>& zs) {
    TextTable t;
    t.header = {"block", "variable", "estimate"};
    for (std::size_t j = 0; j < m.p(); ++j) t.rows.push_back({"beta", xs[j], format_double(m.beta[j])});
    for (std::size_t k = 0; k < m.q(); ++k) t.rows.push_back({"gamma", zs[k], format_double(m.gamma[k])});
    return t;
}

TextTable rounded(const TextTable& t, std::size_t first_numeric) {
    TextTable r = t;
    for (auto& row : r.rows) {
        for (std::size_t j = first_numeric; j < row.size(); ++j) {
            double v = 0.0;
            if (!row[j].empty()) {
                v = std::stod(row[j]);
                row[j] = fixed(v);
            }
        }
    }
    return r;
}

void emit_table(Manifest& m, const fs::path& dir, const std::string& stem, const TextTable& human,
                const TextTable& machine) {
    m.output(dir, stem + ".txt", human.aligned());
    m.output(dir, stem + ".csv", machine.csv());
}

// ---- simulate -------------------------------------------------------------

struct SimulateCmd {
    std::string link = "linear";
    std::string family = "gaussian";
    std::size_t n = 2000;
    double rho = 0.3;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    bool literal_norm = false;
    std::string out;

    void attach(CLI::App& app) {
        app.add_option("--link", link, "True link: linear, s_shape, sigmoid")->capture_default_str();
        app.add_option("--family", family, "gaussian, binomial, poisson, cox")->capture_default_str();
        app.add_option("-n,--n", n, "Number of rows")->capture_default_str();
        app.add_option("--rho", rho, "Exposure equicorrelation")->capture_default_str();
        seed_opt = app.add_option("--seed", seed, "Seed")->capture_default_str();
        app.add_flag("--paper-literal-norm", literal_norm,
                     "Divide beta by sqrt(1.84) as printed, leaving it off the unit sphere");
        app.add_option("-o,--out", out, "Output directory")->required();
    }

    int run(const RunContext& ctx) const {
        const auto s = resolve_seed(seed_opt, seed, ctx);
        SimScenario sc;
        try {
            sc = reference_scenario(parse_link_shape(link), parse_family(family), n, s.value,
                                    literal_norm);
            sc.rho = rho;
            sc.validate();
        } catch (const DomainError& e) {
            throw ArgumentError(e.what());
        }
        const auto sim = simulate(sc);
        const auto& d = sim.data;

        TextTable t;
        for (std::size_t j = 0; j < d.p(); ++j) t.header.push_back("x" + std::to_string(j + 1));
        const std::size_t z0 = sc.family == Family::cox ? 0 : 1; // skip the constant column
        for (std::size_t k = z0; k < d.q(); ++k) t.header.push_back("z" + std::to_string(k + 1 - z0));
        if (sc.family == Family::cox) {
            t.header.push_back("time");
            t.header.push_back("event");
        } else {
            t.header.push_back("y");
        }
        for (std::size_t i = 0; i < d.n(); ++i) {
            std::vector<std::string> row;
            for (double v : d.X.row(i)) row.push_back(format_double(v));
            for (std::size_t k = z0; k < d.q(); ++k) row.push_back(format_double(d.Z(i, k)));
            if (sc.family == Family::cox) {
                row.push_back(format_double(d.outcome.time[i]));
                row.push_back(format_double(d.outcome.event[i]));
            } else {
                row.push_back(format_double(d.outcome.y[i]));
            }
            t.rows.push_back(std::move(row));
        }

        const fs::path dir(out);
        Manifest m("simulate", ctx);
        m.set("seed", {{"value", s.value}, {"source", s.source}});
        json meta = {
            {"link", std::string(to_string(sc.link))},
            {"family", std::string(to_string(sc.family))},
            {"n", sc.n},
            {"rho", sc.rho},
            {"beta_true", sc.beta_true},
            {"gamma_true", sc.gamma_true},
            {"gamma_true_intercept_first", true},
            {"literal_norm", sc.literal_norm},
            {"seed", s.value},
            {"convention", sim.convention},
            {"columns", t.header},
        };
        if (sc.family == Family::cox) {
            meta["censoring_upper"] = sim.censoring_upper;
            double censored = 0.0;
            for (double e : d.outcome.event) censored += e == 0.0 ? 1.0 : 0.0;
            meta["censored_fraction"] = censored / static_cast<double>(d.n());
        }
        m.set("scenario", meta);
        m.output(dir, "data.csv", t.csv());
        m.output(dir, "data.meta.json", meta.dump(2) + "\n");
        m.write(dir);
        std::cout << "wrote " << d.n() << " rows to " << (dir / "data.csv").string() << " ("
                  << sim.convention << ")\n";
        return kOk;
    }
};

// ---- fit ------------------------------------------------------------------

struct FitCmd {
    std::string data;
    std::string out;
    std::string warm;
    ColumnFlags cols;
    FitFlags flags;
    bool no_standardize = false;
    bool verbose = false;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App& app) {
        app.add_option("-d,--data", data, "Input CSV")->required()->check(CLI::ExistingFile);
        cols.attach(app);
        flags.attach(app);
        app.add_flag("--no-standardize", no_standardize, "Use exposures on their raw scale");
        app.add_option("--warm-start", warm, "Checkpoint to start from")->check(CLI::ExistingFile);
        seed_opt = app.add_option("--seed", seed, "Seed")->capture_default_str();
        app.add_flag("-v,--verbose", verbose, "Print per-epoch losses to stderr");
        app.add_option("-o,--out", out, "Output directory")->required();
    }

    int run(const RunContext& ctx) const {
        const auto s = resolve_seed(seed_opt, seed, ctx);
        std::optional<Checkpoint> start;
        FitConfig cfg;
        if (!warm.empty()) {
            start = load_checkpoint(warm);
            const auto base_json = checkpoint_config(*start);
            FitConfig base = base_json.is_null() ? FitConfig{} : fit_config_from_json(base_json);
            base.family = start->family;
            cfg = flags.build(&base);
            if (cfg.family != start->family) {
                throw ArgumentError("--family differs from the warm-start checkpoint's family");
            }
            if (cfg.mlp != start->params.mlp) {
                throw ArgumentError("network shape differs from the warm-start checkpoint");
            }
        } else {
            cfg = flags.build();
        }
        cfg.seed = s.value;
        const auto loaded = load_dataset(data, cols, cfg.family, !no_standardize,
                                         start ? &*start : nullptr);
        const auto result =
            fit(loaded.data, cfg, start ? &start->params : nullptr, [&](const EpochReport& e) {
                if (verbose) {
                    std::cerr << "epoch " << e.epoch << " train " << fixed(e.train_loss, 6)
                              << " validation " << fixed(e.validation_loss, 6) << '\n';
                }
            });

        const fs::path dir(out);
        Manifest m("fit", ctx);
        m.input(data);
        if (start) m.input(warm);
        m.set("seed", {{"value", s.value}, {"source", s.source}});
        m.set("config", to_json(cfg));
        const double g0 = evaluate_at(result.params.theta, result.params.mlp, 0.0);
        m.set("result", {{"stopped_epoch", result.stopped_epoch},
                         {"best_epoch", result.best_epoch},
                         {"flips", result.flips},
                         {"g0", g0}});

        Checkpoint ck;
        ck.params = result.params;
        ck.family = cfg.family;
        ck.exposures = loaded.exposures;
        ck.covariates = loaded.covariates;
        ck.intercept = loaded.intercept;
        ck.x_mean = loaded.x_mean;
        ck.x_sd = loaded.x_sd;
        ck.extra = {{"config", to_json(cfg)}, {"data", fs::absolute(data).lexically_normal().string()}};
        save_checkpoint(dir / "model.ckpt", ck);
        m.output_existing(dir, "model.ckpt");

        auto coef = coefficient_table(result.params, loaded.exposures, loaded.covariates);
        auto human = rounded(coef, 2);
        human.notes.push_back("g(0) = " + fixed(g0) + "; ||beta|| = 1, beta[0] > 0");
        if (!loaded.x_mean.empty()) human.notes.push_back("beta refers to standardized exposures");
        emit_table(m, dir, "coefficients", human, coef);

        TextTable hist;
        hist.header = {"epoch", "train_loss", "validation_loss"};
        for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
            hist.rows.push_back({std::to_string(e + 1), format_double(result.loss_history[e]),
                                 e < result.validation_history.size()
                                     ? format_double(result.validation_history[e])
                                     : std::string()});
        }
        emit_table(m, dir, "history", rounded(hist, 1), hist);
        m.write(dir);
        std::cout << human.aligned();
        return kOk;
    }
};

// ---- bootstrap ------------------------------------------------------------

struct BootstrapCmd {
    std::string data;
    std::string checkpoint;
    std::string out;
    ColumnFlags cols;
    FitFlags flags;
    bool no_standardize = false;
    std::size_t replicates = 100;
    double alpha = 0.05;
    std::size_t jobs = 0;
    bool warm_replicates = false;
    bool verbose = false;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App& app) {
        app.add_option("-d,--data", data, "Input CSV")->required()->check(CLI::ExistingFile);
        app.add_option("--checkpoint", checkpoint, "Fitted model; fitted here when omitted")
            ->check(CLI::ExistingFile);
        cols.attach(app);
        flags.attach(app);
        app.add_flag("--no-standardize", no_standardize, "Use exposures on their raw scale");
        app.add_option("-B,--replicates", replicates, "Bootstrap replicates")->capture_default_str();
        app.add_option("--alpha", alpha, "Significance level")->capture_default_str();
        app.add_option("-j,--jobs", jobs, "Parallel replicate fits (0 = logical cores)")
            ->capture_default_str();
        app.add_flag("--warm-start-replicates", warm_replicates,
                     "Start every replicate fit from the full-data fit");
        seed_opt = app.add_option("--seed", seed, "Seed")->capture_default_str();
        app.add_flag("-v,--verbose", verbose, "Report replicate progress on stderr");
        app.add_option("-o,--out", out, "Output directory")->required();
    }

    int run(const RunContext& ctx) const {
        const auto s = resolve_seed(seed_opt, seed, ctx);
        if (replicates < 2) throw ArgumentError("--replicates must be at least 2");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("--alpha must lie in (0, 1)");
        std::optional<Checkpoint> ck;
        FitConfig cfg;
        if (!checkpoint.empty()) {
            ck = load_checkpoint(checkpoint);
            const auto base_json = checkpoint_config(*ck);
            FitConfig base = base_json.is_null() ? FitConfig{} : fit_config_from_json(base_json);
            base.family = ck->family;
            cfg = flags.build(&base);
            if (cfg.family != ck->family || cfg.mlp != ck->params.mlp) {
                throw ArgumentError("fit flags conflict with the checkpoint's family or network");
            }
        } else {
            cfg = flags.build();
        }
        cfg.seed = s.value;
        const auto loaded =
            load_dataset(data, cols, cfg.family, !no_standardize, ck ? &*ck : nullptr);

        const fs::path dir(out);
        Manifest m("bootstrap", ctx);
        m.input(data);
        if (ck) m.input(checkpoint);
        m.set("seed", {{"value", s.value}, {"source", s.source}});
        m.set("config", to_json(cfg));

        if (!ck) {
            const auto point = fit(loaded.data, cfg);
            ck.emplace();
            ck->params = point.params;
            ck->family = cfg.family;
            ck->exposures = loaded.exposures;
            ck->covariates = loaded.covariates;
            ck->intercept = loaded.intercept;
            ck->x_mean = loaded.x_mean;
            ck->x_sd = loaded.x_sd;
            ck->extra = {{"config", to_json(cfg)},
                         {"data", fs::absolute(data).lexically_normal().string()}};
        }
        save_checkpoint(dir / "point.ckpt", *ck);
        m.output_existing(dir, "point.ckpt");

        BootstrapOptions opt;
        opt.replicates = replicates;
        opt.alpha = alpha;
        opt.rng = Rng(s.value, kBootstrapStream);
        opt.warm_start = warm_replicates;
        opt.jobs = jobs;
        opt.progress = [&](std::size_t d, std::size_t t) { progress_line(verbose, "replicate", d, t); };
        const auto grid = default_grid(ck->params, loaded.data.X);
        opt.grid = grid;
        const auto r = bootstrap(loaded.data, cfg, ck->params, opt);
        m.set("bootstrap", {{"requested", r.requested},
                            {"retried", r.retried},
                            {"dropped", r.dropped},
                            {"alpha", alpha},
                            {"warm_start", warm_replicates},
                            {"jobs", resolve_jobs(jobs, replicates)}});

        std::vector<std::string> names;
        for (const auto& x : ck->exposures) names.push_back("beta[" + x + "]");
        for (const auto& z : ck->covariates) names.push_back("gamma[" + z + "]");
        const int level = static_cast<int>(std::lround(100.0 * (1.0 - alpha)));
        TextTable human;
        human.header = {"parameter", "estimate", "se", std::to_string(level) + "% CI",
                        std::to_string(level) + "% CI (percentile)"};
        TextTable machine;
        machine.header = {"parameter", "estimate", "se", "ci_lo", "ci_hi", "pct_lo", "pct_hi"};
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto& cn = r.ci_normal[j];
            const auto& cp = r.ci_percentile[j];
            human.rows.push_back({names[j], fixed(r.point[j]), fixed(r.se[j]),
                                  "(" + fixed(cn.lo) + ", " + fixed(cn.hi) + ")",
                                  "(" + fixed(cp.lo) + ", " + fixed(cp.hi) + ")"});
            machine.rows.push_back({names[j], format_double(r.point[j]), format_double(r.se[j]),
                                    format_double(cn.lo), format_double(cn.hi),
                                    format_double(cp.lo), format_double(cp.hi)});
        }
        human.notes.push_back("B = " + std::to_string(r.requested) + ", dropped = " +
                              std::to_string(r.dropped) + "; normal intervals are estimate +- z*se");
        emit_table(m, dir, "bootstrap", human, machine);

        TextTable reps;
        reps.header = {"replicate"};
        reps.header.insert(reps.header.end(), names.begin(), names.end());
        for (std::size_t i = 0; i < r.models.size(); ++i) {
            std::vector<std::string> row{std::to_string(r.models[i].id)};
            for (double v : r.replicates.row(i)) row.push_back(format_double(v));
            reps.rows.push_back(std::move(row));
        }
        emit_table(m, dir, "replicates", rounded(reps, 1), reps);

        ModelBundle bundle;
        for (const auto& rep : r.models) {
            bundle.models.push_back(rep.params);
            bundle.ids.push_back(rep.id);
            bundle.mirrored.push_back(rep.mirrored);
        }
        bundle.extra = {{"alpha", alpha}, {"grid_min", grid.front()}, {"grid_max", grid.back()},
                        {"grid_points", grid.size()}, {"family", std::string(to_string(cfg.family))},
                        {"standardized", !ck->x_mean.empty()}};
        const auto side = sidecar_for(data);
        if (fs::exists(side)) {
            try {
                const auto meta = json::parse(read_text(side));
                if (meta.contains("link")) bundle.extra["true_link"] = meta["link"];
            } catch (const json::exception&) {
                // A malformed sidecar only loses the reference curve.
            }
        }
        save_bundle(dir / "replicates.bin", bundle);
        m.output_existing(dir, "replicates.bin");

        const auto& band = *r.curve_band;
        emit_table(m, dir, "curve_band", rounded(curve_table(band, bundle.extra), 0),
                   curve_table(band, bundle.extra));
        m.write(dir);
        std::cout << human.aligned();
        return kOk;
    }

    static TextTable curve_table(const CurveBand& band, const json& extra) {
        TextTable t;
        t.header = {"s", "g_hat", "g_mean", "lo", "hi"};
        std::optional<LinkShape> truth;
        if (extra.contains("true_link")) {
            truth = parse_link_shape(extra["true_link"].get<std::string>());
            t.header.push_back("g_true");
        }
        for (std::size_t k = 0; k < band.grid.size(); ++k) {
            std::vector<std::string> row{format_double(band.grid[k]),
                                         band.fit.empty() ? "" : format_double(band.fit[k]),
                                         format_double(band.mean[k]), format_double(band.lo[k]),
                                         format_double(band.hi[k])};
            if (truth) row.push_back(format_double(eval_true_link(*truth, band.grid[k])));
            t.rows.push_back(std::move(row));
        }
        if (truth && extra.value("standardized", false)) {
            t.notes.push_back("g_true is evaluated on the standardized index");
        }
        return t;
    }
};

// ---- curve ----------------------------------------------------------------

struct CurveCmd {
    std::string boot_dir;
    std::string out;
    std::optional<double> grid_min;
    std::optional<double> grid_max;
    std::size_t points = 201;
    std::optional<double> alpha;

    void attach(CLI::App& app) {
        app.add_option("--bootstrap-dir", boot_dir, "Output directory of `bootstrap`")
            ->required()
            ->check(CLI::ExistingDirectory);
        app.add_option("--grid-min", grid_min, "Lower end of the index grid");
        app.add_option("--grid-max", grid_max, "Upper end of the index grid");
        app.add_option("--points", points, "Grid points")->capture_default_str();
        app.add_option("--alpha", alpha, "Band level (default: the bootstrap's alpha)");
        app.add_option("-o,--out", out, "Output directory")->required();
    }

    int run(const RunContext& ctx) const {
        const fs::path src(boot_dir);
        const auto bundle_path = src / "replicates.bin";
        const auto point_path = src / "point.ckpt";
        if (!fs::exists(bundle_path) || !fs::exists(point_path)) {
            throw ArgumentError("'" + boot_dir +
                                "' lacks replicates.bin or point.ckpt; run `plsinet bootstrap` first");
        }
        if (fs::exists(out) && fs::equivalent(out, src)) {
            throw ArgumentError("--out must differ from --bootstrap-dir (one manifest per directory)");
        }
        if (points < 2) throw ArgumentError("--points must be at least 2");
        const auto bundle = load_bundle(bundle_path);
        const auto point = load_checkpoint(point_path);
        const double lo = grid_min.value_or(bundle.extra.at("grid_min").get<double>());
        const double hi = grid_max.value_or(bundle.extra.at("grid_max").get<double>());
        if (!(lo < hi)) throw ArgumentError("grid minimum must be below the maximum");
        const double a = alpha.value_or(bundle.extra.value("alpha", 0.05));
        if (!(a > 0.0 && a < 1.0)) throw ArgumentError("--alpha must lie in (0, 1)");

        std::vector<double> grid(points);
        for (std::size_t k = 0; k < points; ++k) {
            grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
        }
        std::vector<ReplicateModel> reps;
        for (std::size_t i = 0; i < bundle.models.size(); ++i) {
            reps.push_back({bundle.ids[i], bundle.models[i], bundle.mirrored[i]});
        }
        auto band = curve_band(reps, grid, a);
        band.fit = evaluate(point.params.theta, point.params.mlp, grid);

        const fs::path dir(out);
        Manifest m("curve", ctx);
        m.input(bundle_path);
        m.input(point_path);
        m.set("grid", {{"min", lo}, {"max", hi}, {"points", points}, {"alpha", a}});
        const auto table = BootstrapCmd::curve_table(band, bundle.extra);
        emit_table(m, dir, "curve", rounded(table, 0), table);
        m.write(dir);
        std::cout << "wrote " << points << " grid points to " << (dir / "curve.csv").string() << '\n';
        return kOk;
    }
};

// ---- mcstudy --------------------------------------------------------------

struct McstudyCmd {
    std::string grid_file;
    std::vector<std::string> cells;
    std::vector<std::string> links{"linear", "s_shape", "sigmoid"};
    std::vector<std::string> families{"gaussian"};
    std::vector<std::size_t> sizes{500, 2000};
    std::size_t R = 50;
    std::size_t B = 100;
    double alpha = 0.05;
    double rho = 0.3;
    bool literal_norm = false;
    bool warm_replicates = false;
    std::size_t jobs = 0;
    bool verbose = false;
    FitFlags flags;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* links_opt = nullptr;
    CLI::Option* families_opt = nullptr;
    CLI::Option* sizes_opt = nullptr;
    CLI::Option* r_opt = nullptr;
    CLI::Option* b_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* rho_opt = nullptr;
    std::string out;

    void attach(CLI::App& app) {
        app.add_option("--grid", grid_file, "JSON grid: links, families, sizes, R, B, alpha, rho, seed, fit")
            ->check(CLI::ExistingFile);
        app.add_option("--cell", cells, "Run one cell, e.g. linear,gaussian,2000 (repeatable)");
        links_opt = app.add_option("--links", links, "Link shapes")->delimiter(',')->capture_default_str();
        families_opt =
            app.add_option("--families", families, "Families")->delimiter(',')->capture_default_str();
        sizes_opt = app.add_option("--sizes", sizes, "Sample sizes")->delimiter(',')->capture_default_str();
        r_opt = app.add_option("-R,--replicates", R, "Datasets per cell")->capture_default_str();
        b_opt = app.add_option("-B,--bootstrap", B, "Bootstrap samples per dataset")->capture_default_str();
        alpha_opt = app.add_option("--alpha", alpha, "Interval level")->capture_default_str();
        rho_opt = app.add_option("--rho", rho, "Exposure equicorrelation")->capture_default_str();
        app.add_flag("--paper-literal-norm", literal_norm, "Divide beta by sqrt(1.84)");
        app.add_flag("--warm-start-replicates", warm_replicates,
                     "Start bootstrap refits from each dataset's fit");
        app.add_option("-j,--jobs", jobs, "Parallel replicate datasets (0 = logical cores)")
            ->capture_default_str();
        flags.attach(app, false);
        seed_opt = app.add_option("--seed", seed, "Seed")->capture_default_str();
        app.add_flag("-v,--verbose", verbose, "Report progress on stderr");
        app.add_option("-o,--out", out, "Output directory")->required();
    }

    int run(const RunContext& ctx) const {
        auto L = links;
        auto F = families;
        auto N = sizes;
        auto r = R;
        auto b = B;
        auto a = alpha;
        auto rh = rho;
        std::uint64_t sd = seed;
        bool seed_from_grid = false;
        FitConfig base;
        if (!grid_file.empty()) {
            json g;
            try {
                g = json::parse(read_text(grid_file));
                if (g.contains("links") && links_opt->count() == 0) L = g["links"].get<std::vector<std::string>>();
                if (g.contains("families") && families_opt->count() == 0) F = g["families"].get<std::vector<std::string>>();
                if (g.contains("sizes") && sizes_opt->count() == 0) N = g["sizes"].get<std::vector<std::size_t>>();
                if (g.contains("R") && r_opt->count() == 0) r = g["R"].get<std::size_t>();
                if (g.contains("B") && b_opt->count() == 0) b = g["B"].get<std::size_t>();
                if (g.contains("alpha") && alpha_opt->count() == 0) a = g["alpha"].get<double>();
                if (g.contains("rho") && rho_opt->count() == 0) rh = g["rho"].get<double>();
                if (g.contains("seed") && seed_opt->count() == 0) {
                    sd = g["seed"].get<std::uint64_t>();
                    seed_from_grid = true;
                }
                if (g.contains("fit")) base = fit_config_from_json(g["fit"]);
            } catch (const json::exception& e) {
                throw ArgumentError("grid file '" + grid_file + "': " + e.what());
            } catch (const DomainError& e) {
                throw ArgumentError("grid file '" + grid_file + "': " + e.what());
            }
        }
        auto s = resolve_seed(seed_opt, sd, ctx);
        if (seed_from_grid && s.source == "default") s.source = "grid";
        FitConfig cfg = flags.build(&base);

        struct Cell {
            LinkShape link;
            Family family;
            std::size_t n;
        };
        std::vector<Cell> todo;
        try {
            if (!cells.empty()) {
                for (const auto& c : cells) {
                    const auto parts = CLI::detail::split(c, ',');
                    if (parts.size() != 3) {
                        throw ArgumentError("--cell expects link,family,N; got '" + c + "'");
                    }
                    todo.push_back({parse_link_shape(parts[0]), parse_family(parts[1]),
                                    static_cast<std::size_t>(std::stoull(parts[2]))});
                }
            } else {
                for (const auto& l : L) {
                    for (const auto& f : F) {
                        for (auto n : N) todo.push_back({parse_link_shape(l), parse_family(f), n});
                    }
                }
            }
        } catch (const DomainError& e) {
            throw ArgumentError(e.what());
        } catch (const std::invalid_argument&) {
            throw ArgumentError("--cell sample size is not an integer");
        }
        if (todo.empty()) throw ArgumentError("the grid has no cells");
        if (r < 2 || b < 2) throw ArgumentError("R and B must both be at least 2");

        const fs::path dir(out);
        Manifest m("mcstudy", ctx);
        if (!grid_file.empty()) m.input(grid_file);
        m.set("seed", {{"value", s.value}, {"source", s.source}});
        m.set("config", to_json(cfg));
        m.set("design", {{"R", r}, {"B", b}, {"alpha", a}, {"rho", rh},
                         {"literal_norm", literal_norm}, {"warm_start_replicates", warm_replicates}});
        json cell_log = json::array();
        for (const auto& c : todo) {
            CellSpec spec;
            spec.scenario = reference_scenario(c.link, c.family, c.n, 0, literal_norm);
            spec.scenario.rho = rh;
            try {
                spec.scenario.validate();
            } catch (const DomainError& e) {
                throw ArgumentError(e.what());
            }
            spec.replicates = r;
            spec.bootstrap = b;
            spec.alpha = a;
            spec.config = cfg;
            spec.config.family = c.family;
            spec.seed = s.value;
            spec.warm_start = warm_replicates;
            spec.jobs = jobs;
            const std::string name = std::string(to_string(c.link)) + "_" +
                                     std::string(to_string(c.family)) + "_" + std::to_string(c.n);
            const auto res = run_cell(spec, [&](std::size_t d, std::size_t t) {
                progress_line(verbose, name, d, t);
            });
            const auto f = format_table(res.table);
            m.output(dir, "table_" + name + ".txt", f.text);
            m.output(dir, "table_" + name + ".csv", f.csv);
            m.output(dir, "raw_" + name + ".csv",
                     format_raw_csv(res.raw, parameter_names(spec.scenario)));
            cell_log.push_back({{"cell", name}, {"failed", res.table.failed}});
            std::cout << f.text << '\n';
        }
        m.set("cells", cell_log);
        m.write(dir);
        return kOk;
    }
};

// ---- predict --------------------------------------------------------------

struct PredictCmd {
    std::string checkpoint;
    std::string data;
    std::string out;

    void attach(CLI::App& app) {
        app.add_option("--checkpoint", checkpoint, "Fitted model")->required()->check(CLI::ExistingFile);
        app.add_option("-d,--data", data, "CSV with the checkpoint's exposure and covariate columns")
            ->required()
            ->check(CLI::ExistingFile);
        app.add_option("-o,--out", out, "Output directory")->required();
    }

    int run(const RunContext& ctx) const {
        const auto ck = load_checkpoint(checkpoint);
        const auto loaded = load_for_checkpoint(data, ck, ck.family, false, ColumnFlags{});
        const auto s = index(ck.params, loaded.data.X);
        const auto g = evaluate(ck.params.theta, ck.params.mlp, s);
        const auto eta = predict_eta(ck.params, loaded.data.X, loaded.data.Z);
        std::vector<double> mu;
        if (ck.family != Family::cox) mu = apply_mean_link(ck.family, eta);

        TextTable t;
        t.header = {"row", "index", "g", "eta"};
        if (!mu.empty()) t.header.push_back("mean");
        for (std::size_t i = 0; i < eta.size(); ++i) {
            std::vector<std::string> row{std::to_string(i + 1), format_double(s[i]),
                                         format_double(g[i]), format_double(eta[i])};
            if (!mu.empty()) row.push_back(format_double(mu[i]));
            t.rows.push_back(std::move(row));
        }
        const fs::path dir(out);
        Manifest m("predict", ctx);
        m.input(checkpoint);
        m.input(data);
        emit_table(m, dir, "predictions", rounded(t, 1), t);
        m.write(dir);
        std::cout << "wrote " << eta.size() << " predictions to "
                  << (dir / "predictions.csv").string() << '\n';
        return kOk;
    }
};

// ---- replay ---------------------------------------------------------------

struct ReplayCmd {
    std::string manifest;
    std::string out;

    void attach(CLI::App& app) {
        app.add_option("--manifest", manifest, "manifest.json of an earlier run")
            ->required()
            ->check(CLI::ExistingFile);
        app.add_option("-o,--out", out, "New output directory")->required();
    }

    int run(const RunContext&) const {
        json mf;
        try {
            mf = json::parse(read_text(manifest));
        } catch (const json::exception& e) {
            throw ArgumentError("manifest '" + manifest + "': " + e.what());
        }
        for (const auto& in : mf.value("inputs", json::array())) {
            const auto path = in.at("path").get<std::string>();
            if (!fs::exists(path)) throw ArgumentError("replay input '" + path + "' is missing");
            if (sha256_hex(path) != in.at("sha256").get<std::string>()) {
                throw DomainError("replay input '" + path + "' changed since the recorded run");
            }
        }
        auto args = mf.at("argv").get<std::vector<std::string>>();
        std::vector<std::string> next;
        for (std::size_t i = 0; i < args.size(); ++i) {
            const auto& a = args[i];
            if (a == "-o" || a == "--out" || a == "--seed") {
                ++i;
                continue;
            }
            if (a.rfind("--out=", 0) == 0 || a.rfind("--seed=", 0) == 0) continue;
            next.push_back(a);
        }
        if (next.empty() || next.front() == "replay") throw ArgumentError("manifest has no replayable command");
        next.push_back("--out");
        next.push_back(out);
        if (mf.contains("seed")) {
            next.push_back("--seed");
            next.push_back(std::to_string(mf["seed"].at("value").get<std::uint64_t>()));
        }
        return cli::run(next, false);
    }
};

int dispatch(const std::vector<std::string>& args, RunContext ctx) {
    CLI::App app{"plsinet: neural partial-linear single-index models", "plsinet"};
    app.footer(kPrngNote);
    app.set_version_flag("--version", PLSINET_VERSION);
    app.require_subcommand(1);

    SimulateCmd simulate_cmd;
    FitCmd fit_cmd;
    BootstrapCmd boot_cmd;
    CurveCmd curve_cmd;
    McstudyCmd mc_cmd;
    PredictCmd predict_cmd;
    ReplayCmd replay_cmd;
    simulate_cmd.attach(*app.add_subcommand("simulate", "Generate a dataset from the simulation design"));
    fit_cmd.attach(*app.add_subcommand("fit", "Fit a model to a CSV dataset"));
    boot_cmd.attach(*app.add_subcommand("bootstrap", "Bootstrap standard errors and intervals"));
    curve_cmd.attach(*app.add_subcommand("curve", "Export the link curve and its bootstrap band"));
    mc_cmd.attach(*app.add_subcommand("mcstudy", "Monte-Carlo bias / SD / SE / coverage tables"));
    predict_cmd.attach(*app.add_subcommand("predict", "Predict from a checkpoint"));
    replay_cmd.attach(*app.add_subcommand("replay", "Re-run the command recorded in a manifest"));
    for (auto* sub : app.get_subcommands({})) sub->footer(kPrngNote);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kArgumentError;
    }
    ctx.argv = args;
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "simulate") return simulate_cmd.run(ctx);
    if (name == "fit") return fit_cmd.run(ctx);
    if (name == "bootstrap") return boot_cmd.run(ctx);
    if (name == "curve") return curve_cmd.run(ctx);
    if (name == "mcstudy") return mc_cmd.run(ctx);
    if (name == "predict") return predict_cmd.run(ctx);
    return replay_cmd.run(ctx);
}

} // namespace

int run(const std::vector<std::string>& args, bool allow_env_seed) {
    RunContext ctx;
    ctx.env_seed_allowed = allow_env_seed;
    try {
        return dispatch(args, ctx);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kArgumentError;
    } catch (const UnsupportedFamilyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kArgumentError;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const InferenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInferenceFailure;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kArgumentError;
    }
}

} // namespace plsinet::cli
