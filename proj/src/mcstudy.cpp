#include "plsinet/mcstudy.hpp"

#include "plsinet/errors.hpp"
#include "plsinet/inference.hpp"
#include "plsinet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <mutex>
#include <sstream>

namespace plsinet {

std::vector<std::string> parameter_names(const SimScenario& scenario) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < scenario.beta_true.size(); ++j) {
        names.push_back("beta" + std::to_string(j + 1));
    }
    for (auto& g : scenario.gamma_names()) names.push_back(std::move(g));
    return names;
}

std::vector<double> parameter_truth(const SimScenario& scenario) {
    std::vector<double> t = scenario.beta_true;
    const auto g = scenario.estimable_gamma();
    t.insert(t.end(), g.begin(), g.end());
    return t;
}

namespace {

ReplicateEstimate run_replicate(const CellSpec& spec, std::size_t r) {
    const Rng stream = Rng(spec.seed).substream(r);
    ReplicateEstimate out;
    out.replicate = r;
    out.data_seed = stream.substream(0).next_u64();

    SimScenario sc = spec.scenario;
    sc.seed = out.data_seed;
    FitConfig cfg = spec.config;
    cfg.family = sc.family;
    cfg.seed = stream.substream(1).next_u64();
    try {
        const auto sim = simulate(sc);
        const auto point = fit(sim.data, cfg);
        BootstrapOptions opt;
        opt.replicates = spec.bootstrap;
        opt.alpha = spec.alpha;
        opt.rng = stream.substream(2);
        opt.warm_start = spec.warm_start;
        opt.curve = false;
        const auto boot = bootstrap(sim.data, cfg, point.params, opt);
        out.estimate = boot.point;
        out.se = boot.se;
        for (std::size_t j = 0; j < boot.point.size(); ++j) {
            out.ci_lo.push_back(boot.ci_normal[j].lo);
            out.ci_hi.push_back(boot.ci_normal[j].hi);
            out.pct_lo.push_back(boot.ci_percentile[j].lo);
            out.pct_hi.push_back(boot.ci_percentile[j].hi);
        }
        out.g0 = evaluate_at(point.params.theta, point.params.mlp, 0.0);
        for (const auto& m : boot.models) {
            out.boot_g0_max = std::max(out.boot_g0_max,
                                       std::abs(evaluate_at(m.params.theta, m.params.mlp, 0.0)));
        }
        out.ok = true;
    } catch (const DivergenceError& e) {
        out.failure = std::string("divergence: ") + e.what();
    } catch (const InferenceError& e) {
        out.failure = std::string("inference: ") + e.what();
    } catch (const NoEventsError& e) {
        out.failure = std::string("no events: ") + e.what();
    }
    return out;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string full(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v); // shortest round-trip form
    return {buf, res.ptr};
}

} // namespace

MetricTable compute_metrics(const std::vector<ReplicateEstimate>& raw,
                            const std::vector<std::string>& names,
                            const std::vector<double>& truth) {
    if (names.size() != truth.size()) throw ShapeError("parameter names and truth differ in length");
    MetricTable t;
    std::vector<const ReplicateEstimate*> ok;
    for (const auto& r : raw) {
        if (!r.ok) {
            ++t.failed;
            continue;
        }
        if (r.estimate.size() != names.size()) {
            throw ShapeError("replicate " + std::to_string(r.replicate) +
                             " has the wrong number of estimates");
        }
        ok.push_back(&r);
    }
    t.replicates = raw.size();
    if (ok.size() < 2) {
        throw InferenceError(std::to_string(ok.size()) + " of " + std::to_string(raw.size()) +
                             " replicates succeeded; need at least two");
    }
    const auto R = static_cast<double>(ok.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        std::vector<double> est;
        double se_sum = 0.0;
        double cover = 0.0;
        double cover_pct = 0.0;
        for (const auto* r : ok) {
            est.push_back(r->estimate[j]);
            se_sum += r->se[j];
            cover += (r->ci_lo[j] <= truth[j] && truth[j] <= r->ci_hi[j]) ? 1.0 : 0.0;
            cover_pct += (r->pct_lo[j] <= truth[j] && truth[j] <= r->pct_hi[j]) ? 1.0 : 0.0;
        }
        MetricRow row;
        row.parameter = names[j];
        row.truth = truth[j];
        row.bias = mean(est) - truth[j];
        row.sd = sample_sd(est);
        row.se_mean = se_sum / R;
        row.cp = cover / R;
        row.cp_percentile = cover_pct / R;
        t.rows.push_back(row);
    }
    return t;
}

CellResult run_cell(const CellSpec& spec,
                    const std::function<void(std::size_t, std::size_t)>& progress) {
    if (spec.replicates < 2) throw DomainError("a cell needs at least two replicates");
    if (spec.bootstrap < 2) throw DomainError("a cell needs at least two bootstrap samples");
    spec.scenario.validate();

    CellResult out;
    out.raw.resize(spec.replicates);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    parallel_for(spec.replicates, spec.jobs, [&](std::size_t r) {
        out.raw[r] = run_replicate(spec, r);
        const std::size_t finished = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(finished, spec.replicates);
        }
    });

    out.table = compute_metrics(out.raw, parameter_names(spec.scenario),
                                parameter_truth(spec.scenario));
    out.table.link = std::string(to_string(spec.scenario.link));
    out.table.family = std::string(to_string(spec.scenario.family));
    out.table.n = spec.scenario.n;
    out.table.rho = spec.scenario.rho;
    out.table.bootstrap = spec.bootstrap;
    out.table.alpha = spec.alpha;
    out.table.seed = spec.seed;
    out.table.convention = spec.scenario.family == Family::gaussian ? "paper"
                                                                   : "synthetic-convention";
    return out;
}

FormattedTable format_table(const MetricTable& t) {
    FormattedTable f;
    std::ostringstream txt;
    char line[256];
    txt << "# link=" << t.link << " family=" << t.family << " n=" << t.n << " rho=" << full(t.rho)
        << " R=" << t.replicates << " B=" << t.bootstrap << " failed=" << t.failed
        << " seed=" << t.seed << " convention=" << t.convention << '\n';
    std::snprintf(line, sizeof line, "%-12s %9s %9s %9s %9s %9s %9s\n", "parameter", "truth",
                  "bias", "sd", "se", "cp", "cp_pct");
    txt << line;
    std::ostringstream csv;
    csv << "parameter,truth,bias,sd,se_mean,cp,cp_percentile\n";
    for (const auto& r : t.rows) {
        std::snprintf(line, sizeof line, "%-12s %9s %9s %9s %9s %9s %9s\n", r.parameter.c_str(),
                      fixed4(r.truth).c_str(), fixed4(r.bias).c_str(), fixed4(r.sd).c_str(),
                      fixed4(r.se_mean).c_str(), fixed4(r.cp).c_str(),
                      fixed4(r.cp_percentile).c_str());
        txt << line;
        csv << r.parameter << ',' << full(r.truth) << ',' << full(r.bias) << ',' << full(r.sd)
            << ',' << full(r.se_mean) << ',' << full(r.cp) << ',' << full(r.cp_percentile)
            << '\n';
    }
    if (!t.rows.empty()) {
        txt << "# gamma1..gamma3 are the coefficients of Z1..Z3; the intercept row, when present,"
               " is the constant column\n";
        std::snprintf(line, sizeof line, "# cp: %g%% normal intervals; cp_pct: percentile intervals\n",
                      100.0 * (1.0 - t.alpha));
        txt << line;
    }
    f.text = txt.str();
    f.csv = csv.str();
    return f;
}

std::vector<MetricRow> parse_table_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "parameter,truth,bias,sd,se_mean,cp,cp_percentile") {
        throw DomainError("metric table CSV has an unexpected header");
    }
    std::vector<MetricRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (std::size_t k = 0; k <= line.size(); ++k) {
            if (k == line.size() || line[k] == ',') {
                cells.push_back(line.substr(start, k - start));
                start = k + 1;
            }
        }
        if (cells.size() != 7) {
            throw DomainError("metric table CSV line " + std::to_string(lineno) + " has " +
                              std::to_string(cells.size()) + " fields, expected 7");
        }
        MetricRow r;
        r.parameter = cells[0];
        double* dst[] = {&r.truth, &r.bias, &r.sd, &r.se_mean, &r.cp, &r.cp_percentile};
        for (int k = 0; k < 6; ++k) {
            const auto& c = cells[static_cast<std::size_t>(k) + 1];
            const auto res = std::from_chars(c.data(), c.data() + c.size(), *dst[k]);
            if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
                throw DomainError("metric table CSV line " + std::to_string(lineno) +
                                  ": cannot parse '" + c + "'");
            }
        }
        rows.push_back(r);
    }
    return rows;
}

std::string format_raw_csv(const std::vector<ReplicateEstimate>& raw,
                           const std::vector<std::string>& names) {
    std::ostringstream out;
    out << "replicate,data_seed,status,parameter,estimate,se,ci_lo,ci_hi,pct_lo,pct_hi,g0\n";
    for (const auto& r : raw) {
        if (!r.ok) {
            out << r.replicate << ',' << r.data_seed << ",failed,,,,,,,,\n";
            continue;
        }
        for (std::size_t j = 0; j < names.size(); ++j) {
            out << r.replicate << ',' << r.data_seed << ",ok," << names[j] << ','
                << full(r.estimate[j]) << ',' << full(r.se[j]) << ',' << full(r.ci_lo[j]) << ','
                << full(r.ci_hi[j]) << ',' << full(r.pct_lo[j]) << ',' << full(r.pct_hi[j]) << ','
                << full(r.g0) << '\n';
        }
    }
    return out.str();
}

} // namespace plsinet
