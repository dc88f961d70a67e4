#include "plsinet/inference.hpp"

#include "plsinet/errors.hpp"
#include "plsinet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <string>

namespace plsinet {

Projection align_replicate(std::span<const double> beta_rep, std::span<const double> beta_point,
                           double tie_tol) {
    Projection out = project_identifiable(beta_rep);
    if (std::abs(out.beta[0]) <= tie_tol && beta_point.size() == out.beta.size() &&
        dot(out.beta, beta_point) < 0.0) {
        for (double& v : out.beta) v = -v;
        out.flipped = !out.flipped;
    }
    return out;
}

std::vector<double> default_grid(const ModelParams& point, const Matrix& X, std::size_t points) {
    if (points < 2) throw DomainError("curve grid needs at least two points");
    auto s = index(point, X);
    if (s.empty()) throw EmptyDataError("cannot build a curve grid from zero rows");
    std::sort(s.begin(), s.end());
    const double lo = quantile_sorted(s, 0.005);
    const double hi = quantile_sorted(s, 0.995);
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k) {
        grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    return grid;
}

CurveBand curve_band(std::span<const ReplicateModel> replicates, std::span<const double> grid,
                     double alpha) {
    if (grid.empty()) throw DomainError("curve band needs a non-empty grid");
    if (replicates.size() < 2) throw DomainError("curve band needs at least two replicates");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    for (double s : grid) {
        if (!std::isfinite(s)) throw DomainError("curve grid contains a non-finite value");
    }

    const std::size_t B = replicates.size();
    std::vector<double> mirrored(grid.size());
    std::transform(grid.begin(), grid.end(), mirrored.begin(), [](double s) { return -s; });
    std::vector<std::vector<double>> curves;
    curves.reserve(B);
    for (const auto& r : replicates) {
        curves.push_back(evaluate(r.params.theta, r.params.mlp,
                                  r.mirrored ? std::span<const double>(mirrored) : grid));
    }

    CurveBand band;
    band.alpha = alpha;
    band.grid.assign(grid.begin(), grid.end());
    band.mean.resize(grid.size());
    band.lo.resize(grid.size());
    band.hi.resize(grid.size());
    std::vector<double> column(B);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (std::size_t b = 0; b < B; ++b) column[b] = curves[b][k];
        band.mean[k] = mean(column);
        std::sort(column.begin(), column.end());
        band.lo[k] = quantile_sorted(column, alpha / 2.0);
        band.hi[k] = quantile_sorted(column, 1.0 - alpha / 2.0);
    }
    return band;
}

void summarize_replicates(BootstrapResult& r) {
    const std::size_t B = r.replicates.rows();
    const std::size_t m = r.replicates.cols();
    if (r.point.size() != m) throw ShapeError("point estimate length does not match replicates");
    if (B < 2) throw InferenceError("fewer than two bootstrap replicates available");
    const double z = standard_normal_quantile(1.0 - r.alpha / 2.0);
    r.boot_mean.assign(m, 0.0);
    r.se.assign(m, 0.0);
    r.ci_normal.assign(m, {});
    r.ci_percentile.assign(m, {});
    for (std::size_t j = 0; j < m; ++j) {
        auto col = r.replicates.column(j);
        r.boot_mean[j] = mean(col);
        double ss = 0.0;
        for (double v : col) ss += (v - r.boot_mean[j]) * (v - r.boot_mean[j]);
        r.se[j] = std::sqrt(ss / static_cast<double>(B - 1));
        r.ci_normal[j] = {r.point[j] - z * r.se[j], r.point[j] + z * r.se[j]};
        std::sort(col.begin(), col.end());
        r.ci_percentile[j] = {quantile_sorted(col, r.alpha / 2.0),
                              quantile_sorted(col, 1.0 - r.alpha / 2.0)};
    }
}

namespace {

struct Attempt {
    bool ok = false;
    bool retried = false;
    ModelParams params;
};

ModelParams refit(const Dataset& data, const FitConfig& config, const ModelParams& point,
                  bool warm, Rng rng) {
    const std::size_t n = data.n();
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(n));
    FitConfig cfg = config;
    cfg.seed = rng.next_u64();
    if (warm && cfg.epochs == 0) cfg.epochs = 1;
    return fit(data.subset(idx), cfg, warm ? &point : nullptr).params;
}

Attempt run_replicate(const Dataset& data, const FitConfig& config, const ModelParams& point,
                      bool warm, const Rng& base, std::size_t b) {
    Attempt a;
    const Rng first = base.substream(b);
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            a.params = refit(data, config, point, warm, attempt == 0 ? first : first.substream(1));
            a.ok = true;
            return a;
        } catch (const DivergenceError&) {
        } catch (const NoEventsError&) {
        } catch (const DegenerateDirectionError&) {
        }
        a.retried = true;
    }
    return a;
}

} // namespace

BootstrapResult bootstrap(const Dataset& data, const FitConfig& config, const ModelParams& point,
                          const BootstrapOptions& options) {
    if (options.replicates < 2) throw DomainError("bootstrap needs at least two replicates");
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
        throw DomainError("alpha must lie in (0, 1)");
    }
    data.validate();
    point.check_invariants();
    if (point.p() != data.p() || point.q() != data.q()) {
        throw ShapeError("point estimate does not match the data dimensions");
    }

    const std::size_t B = options.replicates;
    std::vector<Attempt> attempts(B);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    parallel_for(B, options.jobs, [&](std::size_t b) {
        attempts[b] = run_replicate(data, config, point, options.warm_start, options.rng, b);
        const std::size_t finished = ++done;
        if (options.progress) {
            std::lock_guard lock(progress_mutex);
            options.progress(finished, B);
        }
    });

    BootstrapResult r;
    r.alpha = options.alpha;
    r.requested = B;
    r.point = point.beta;
    r.point.insert(r.point.end(), point.gamma.begin(), point.gamma.end());
    for (std::size_t b = 0; b < B; ++b) {
        r.retried += attempts[b].retried ? 1 : 0;
        if (!attempts[b].ok) {
            ++r.dropped;
            continue;
        }
        ReplicateModel rep;
        rep.id = b;
        rep.params = std::move(attempts[b].params);
        const auto aligned = align_replicate(rep.params.beta, point.beta);
        rep.params.beta = aligned.beta;
        rep.mirrored = aligned.flipped;
        r.models.push_back(std::move(rep));
    }
    if (5 * r.dropped > B) {
        throw InferenceError(std::to_string(r.dropped) + " of " + std::to_string(B) +
                             " bootstrap replicates failed (limit 20%)");
    }

    const std::size_t m = point.p() + point.q();
    r.replicates = Matrix(r.models.size(), m);
    for (std::size_t i = 0; i < r.models.size(); ++i) {
        const auto& pr = r.models[i].params;
        auto row = r.replicates.row(i);
        std::copy(pr.beta.begin(), pr.beta.end(), row.begin());
        std::copy(pr.gamma.begin(), pr.gamma.end(),
                  row.begin() + static_cast<std::ptrdiff_t>(pr.beta.size()));
    }
    summarize_replicates(r);

    if (options.curve) {
        const auto grid = options.grid ? *options.grid : default_grid(point, data.X);
        r.curve_band = curve_band(r.models, grid, options.alpha);
        r.curve_band->fit = evaluate(point.theta, point.mlp, grid);
    }
    return r;
}

BootstrapResult bootstrap(const Dataset& data, const FitConfig& config,
                          const BootstrapOptions& options) {
    const auto full = fit(data, config);
    return bootstrap(data, config, full.params, options);
}

} // namespace plsinet
