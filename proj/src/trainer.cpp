#include "plsinet/trainer.hpp"

#include "plsinet/errors.hpp"
#include "plsinet/objectives.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

namespace plsinet {

std::string_view to_string(BetaInit b) noexcept {
    switch (b) {
    case BetaInit::uniform_simplex_direction: return "uniform_simplex_direction";
    case BetaInit::random_sphere: return "random_sphere";
    case BetaInit::linear_projection: return "linear_projection";
    }
    return "unknown";
}

BetaInit parse_beta_init(std::string_view name) {
    if (name == "uniform_simplex_direction" || name == "uniform") {
        return BetaInit::uniform_simplex_direction;
    }
    if (name == "random_sphere" || name == "random") return BetaInit::random_sphere;
    if (name == "linear_projection" || name == "linear") return BetaInit::linear_projection;
    throw DomainError("unknown beta initialisation '" + std::string(name) + "'");
}

std::string_view to_string(CoxBatching b) noexcept {
    switch (b) {
    case CoxBatching::full: return "full";
    case CoxBatching::risk_set_minibatch: return "risk_set_minibatch";
    }
    return "unknown";
}

std::string_view to_string(InterceptInit i) noexcept {
    switch (i) {
    case InterceptInit::zero: return "zero";
    case InterceptInit::null_model: return "null_model";
    }
    return "unknown";
}

InterceptInit parse_intercept_init(std::string_view name) {
    if (name == "zero") return InterceptInit::zero;
    if (name == "null_model" || name == "null") return InterceptInit::null_model;
    throw DomainError("unknown intercept initialisation '" + std::string(name) + "'");
}

CoxBatching parse_cox_batching(std::string_view name) {
    if (name == "full") return CoxBatching::full;
    if (name == "risk_set_minibatch" || name == "minibatch") return CoxBatching::risk_set_minibatch;
    throw DomainError("unknown cox batching '" + std::string(name) + "'");
}

void FitConfig::validate() const {
    mlp.validate();
    if (batch_size == 0) throw DomainError("batch size must be at least 1");
    if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
    if (!(adam_betas[0] >= 0.0 && adam_betas[0] < 1.0 && adam_betas[1] >= 0.0 &&
          adam_betas[1] < 1.0)) {
        throw DomainError("Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw DomainError("Adam epsilon must be positive");
    if (!(anchoring_weight >= 0.0)) throw DomainError("anchoring weight must be non-negative");
    if (!(index_centering_weight >= 0.0)) {
        throw DomainError("index centering weight must be non-negative");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 0.5)) {
        throw DomainError("validation fraction must lie in [0, 0.5)");
    }
}

ObjectiveValue evaluate_objective(const ModelParams& params, const Dataset& batch,
                                  const FitConfig& config) {
    const std::size_t n = batch.n();
    const auto s = index(params, batch.X);
    auto fwd = forward(params.theta, params.mlp, s);
    std::vector<double> eta = std::move(fwd.outputs);
    for (std::size_t i = 0; i < n; ++i) {
        eta[i] += dot(batch.Z.row(i), params.gamma);
    }
    const LossValue loss = evaluate_loss(batch.outcome, eta, batch.weights);

    ObjectiveValue out;
    out.loss = loss.total;
    out.value = loss.total;
    out.grad_gamma.assign(params.q(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto z = batch.Z.row(i);
        for (std::size_t k = 0; k < z.size(); ++k) {
            out.grad_gamma[k] += loss.grad[i] * z[k];
        }
    }

    auto grads = backward(fwd.tape, loss.grad);
    out.grad_theta = std::move(grads.theta);
    std::vector<double>& grad_s = grads.s;

    if (config.index_centering_weight > 0.0) {
        const double w = config.index_centering_weight / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            out.value += w * s[i] * s[i];
            grad_s[i] += 2.0 * w * s[i];
        }
    }

    out.grad_beta.assign(params.p(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = batch.X.row(i);
        for (std::size_t j = 0; j < x.size(); ++j) {
            out.grad_beta[j] += grad_s[i] * x[j];
        }
    }

    if (config.anchoring_weight > 0.0) {
        const auto pen = anchoring_penalty(params.theta, params.mlp, config.anchoring_weight);
        out.value += pen.value;
        for (std::size_t k = 0; k < out.grad_theta.size(); ++k) {
            out.grad_theta[k] += pen.grad_theta[k];
        }
    }
    return out;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, std::array<double, 2> betas, double eps) {
    if (state.m.size() != params.size() || grads.size() != params.size()) {
        throw ShapeError("Adam state, parameters and gradients differ in length");
    }
    ++state.t;
    const double b1 = betas[0];
    const double b2 = betas[1];
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

std::vector<std::size_t> shuffle_epoch(Rng& rng, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::vector<double> initial_beta(std::size_t p, BetaInit how, Rng& rng) {
    if (p == 0) {
        throw ShapeError("index direction needs at least one exposure");
    }
    std::vector<double> beta(p, 1.0);
    if (how == BetaInit::random_sphere) {
        do {
            for (double& v : beta) {
                v = rng.normal();
            }
        } while (norm2(beta) == 0.0);
    }
    return project_identifiable(beta).beta;
}

namespace {

// Parameter packing for the optimiser: [gamma | beta | theta].
std::vector<double> pack(const ModelParams& m) {
    std::vector<double> flat;
    flat.reserve(m.q() + m.p() + m.theta.flat.size());
    flat.insert(flat.end(), m.gamma.begin(), m.gamma.end());
    flat.insert(flat.end(), m.beta.begin(), m.beta.end());
    flat.insert(flat.end(), m.theta.flat.begin(), m.theta.flat.end());
    return flat;
}

void unpack(std::span<const double> flat, ModelParams& m) {
    const std::size_t q = m.q();
    const std::size_t p = m.p();
    std::copy_n(flat.begin(), q, m.gamma.begin());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(q), p, m.beta.begin());
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(q + p), flat.end(), m.theta.flat.begin());
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

[[noreturn]] void diverged(std::size_t epoch, double lr) {
    std::ostringstream os;
    os << "training diverged at epoch " << epoch
       << " (non-finite objective); try a learning rate below " << lr;
    throw DivergenceError(os.str(), epoch);
}

// Column of Z that is constant 1, if any.
std::optional<std::size_t> intercept_column(const Matrix& Z) {
    for (std::size_t k = 0; k < Z.cols(); ++k) {
        bool constant = Z.rows() > 0;
        for (std::size_t i = 0; i < Z.rows() && constant; ++i) {
            constant = Z(i, k) == 1.0;
        }
        if (constant) return k;
    }
    return std::nullopt;
}

// Intercept of the covariate-free model: mean, logit of the mean or log mean.
double null_intercept(const Dataset& d) {
    if (d.outcome.family == Family::cox) return 0.0;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double w = d.weights.empty() ? 1.0 : d.weights[i];
        num += w * d.outcome.y[i];
        den += w;
    }
    const double m = num / den;
    switch (d.outcome.family) {
    case Family::binomial: {
        const double c = std::clamp(m, 1e-6, 1.0 - 1e-6);
        return std::log(c / (1.0 - c));
    }
    case Family::poisson: return std::log(std::max(m, 1e-6));
    default: return m;
    }
}

// GLM of the outcome on the columns of D by iteratively reweighted least
// squares, started from `coef`. Returns nullopt when the fit does not settle,
// e.g. under separation.
std::optional<std::vector<double>> irls(const Matrix& D, const Dataset& d, std::vector<double> coef) {
    const std::size_t n = D.rows(), q = D.cols();
    for (int iter = 0; iter < 50; ++iter) {
        Matrix A(q, q);
        std::vector<double> b(q, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto z = D.row(i);
            const double eta = dot(z, coef);
            const double y = d.outcome.y[i];
            double mu = eta, var = 1.0;
            if (d.outcome.family == Family::binomial) {
                mu = 1.0 / (1.0 + std::exp(-eta));
                var = mu * (1.0 - mu);
            } else if (d.outcome.family == Family::poisson) {
                mu = std::exp(eta);
                var = mu;
            }
            const double w = (d.weights.empty() ? 1.0 : d.weights[i]) * std::max(var, 1e-10);
            const double work = eta + (y - mu) / std::max(var, 1e-10);
            for (std::size_t r = 0; r < q; ++r) {
                b[r] += w * z[r] * work;
                for (std::size_t c = 0; c <= r; ++c) A(r, c) += w * z[r] * z[c];
            }
        }
        double trace = 0.0;
        for (std::size_t r = 0; r < q; ++r) trace += A(r, r);
        for (std::size_t r = 0; r < q; ++r) {
            A(r, r) += 1e-10 * trace;
            for (std::size_t c = 0; c < r; ++c) A(c, r) = A(r, c);
        }
        Matrix L;
        try {
            L = cholesky(A);
        } catch (const FactorizationError&) {
            return std::nullopt;
        }
        std::vector<double> next(q);
        for (std::size_t r = 0; r < q; ++r) {
            double v = b[r];
            for (std::size_t c = 0; c < r; ++c) v -= L(r, c) * next[c];
            next[r] = v / L(r, r);
        }
        for (std::size_t r = q; r-- > 0;) {
            double v = next[r];
            for (std::size_t c = r + 1; c < q; ++c) v -= L(c, r) * next[c];
            next[r] = v / L(r, r);
        }
        double step = 0.0;
        for (std::size_t r = 0; r < q; ++r) step = std::max(step, std::abs(next[r] - coef[r]));
        if (!all_finite(next) || step > 1e6) return std::nullopt;
        coef = std::move(next);
        if (step < 1e-10 || d.outcome.family == Family::gaussian) return coef;
    }
    return std::nullopt;
}

// Covariate-only fit (g = 0), started from the null intercept.
std::optional<std::vector<double>> null_gamma(const Dataset& d) {
    std::vector<double> start(d.q(), 0.0);
    if (const auto k = intercept_column(d.Z)) start[*k] = null_intercept(d);
    return irls(d.Z, d, std::move(start));
}

// Direction of the exposure coefficients in the GLM on [X | Z]. For
// elliptically distributed X this is proportional to the index direction.
std::optional<std::vector<double>> linear_direction(const Dataset& d) {
    Matrix D(d.n(), d.p() + d.q());
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < d.p(); ++j) D(i, j) = d.X(i, j);
        for (std::size_t k = 0; k < d.q(); ++k) D(i, d.p() + k) = d.Z(i, k);
    }
    std::vector<double> start(D.cols(), 0.0);
    if (const auto k = intercept_column(d.Z)) start[d.p() + *k] = null_intercept(d);
    const auto coef = irls(D, d, std::move(start));
    if (!coef) return std::nullopt;
    std::vector<double> beta(coef->begin(), coef->begin() + static_cast<std::ptrdiff_t>(d.p()));
    if (!(norm2(beta) > 1e-12)) return std::nullopt;
    return project_identifiable(beta).beta;
}

bool has_events(const Dataset& d) {
    if (d.outcome.family != Family::cox) {
        return true;
    }
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d.outcome.event[i] != 0.0 && (d.weights.empty() || d.weights[i] > 0.0)) {
            return true;
        }
    }
    return false;
}

double validation_loss(const ModelParams& params, const Dataset& val) {
    const auto eta = predict_eta(params, val.X, val.Z);
    return evaluate_loss(val.outcome, eta, val.weights).total;
}

} // namespace

FitResult fit(const Dataset& data, const FitConfig& config, const ModelParams* warm_start,
              const ProgressCallback& progress) {
    config.validate();
    data.validate();
    if (data.outcome.family != config.family) {
        throw DomainError("dataset family '" + std::string(to_string(data.outcome.family)) +
                          "' does not match the fit configuration '" +
                          std::string(to_string(config.family)) + "'");
    }
    if (config.epochs == 0 && warm_start == nullptr) {
        throw DomainError("epochs must be at least 1 unless warm starting");
    }

    const Rng root(config.seed);
    Rng split_rng = root.substream(1);
    Rng init_rng = root.substream(2);
    Rng shuffle_rng = root.substream(3);

    // Train / validation split.
    const std::size_t n = data.n();
    auto val_n = static_cast<std::size_t>(std::floor(config.validation_fraction *
                                                     static_cast<double>(n)));
    bool early_stop = config.early_stop_patience > 0 && val_n >= 1 && val_n < n;
    Dataset train;
    Dataset val;
    if (early_stop) {
        const auto perm = shuffle_epoch(split_rng, n);
        std::vector<std::size_t> tr(perm.begin() + static_cast<std::ptrdiff_t>(val_n), perm.end());
        std::vector<std::size_t> va(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(val_n));
        std::sort(tr.begin(), tr.end());
        std::sort(va.begin(), va.end());
        train = data.subset(tr);
        val = data.subset(va);
        if (!has_events(val) || !has_events(train)) {
            early_stop = false;
        }
    }
    if (!early_stop) {
        train = data;
        val = Dataset{};
    }
    if (!has_events(train)) {
        throw NoEventsError("training data contains no observed events");
    }

    FitResult result;
    result.config = config;
    ModelParams& params = result.params;
    if (warm_start != nullptr) {
        if (warm_start->p() != data.p() || warm_start->q() != data.q() ||
            warm_start->mlp != config.mlp) {
            throw ShapeError("warm-start parameters do not match the data or network spec");
        }
        params = *warm_start;
        // Leave an already identified direction bit-for-bit untouched.
        if (params.beta.empty() || !(params.beta[0] > 0.0) || std::abs(norm2(params.beta) - 1.0) > 1e-12) {
            params.beta = project_identifiable(params.beta).beta;
        }
    } else {
        params.beta = initial_beta(data.p(), config.beta_init, init_rng);
        if (config.beta_init == BetaInit::linear_projection && config.family != Family::cox) {
            if (auto b = linear_direction(train)) params.beta = std::move(*b);
        }
        params.gamma.assign(data.q(), 0.0);
        if (config.intercept_init == InterceptInit::null_model && data.q() > 0 &&
            config.family != Family::cox) {
            if (auto g = null_gamma(train)) {
                params.gamma = std::move(*g);
            } else if (const auto k = intercept_column(data.Z)) {
                params.gamma[*k] = null_intercept(train);
            }
        }
        params.mlp = config.mlp;
        params.theta = he_init(init_rng, config.mlp);
    }

    const std::size_t n_train = train.n();
    std::size_t batch = std::min(config.batch_size, n_train);
    if (config.family == Family::cox && config.cox_batching == CoxBatching::full) {
        batch = n_train;
    }

    std::vector<double> flat = pack(params);
    AdamState adam(flat.size());
    const std::size_t q = params.q();
    const std::size_t p = params.p();
    std::vector<double> grad(flat.size());

    double best_val = std::numeric_limits<double>::infinity();
    ModelParams best = params;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto perm = shuffle_epoch(shuffle_rng, n_train);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < n_train; start += batch) {
            const std::size_t stop = std::min(start + batch, n_train);
            std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
            const Dataset mb = train.subset(idx);
            if (!has_events(mb)) {
                continue;
            }
            ObjectiveValue obj;
            try {
                obj = evaluate_objective(params, mb, config);
            } catch (const NumericError&) {
                diverged(epoch, config.learning_rate);
            }
            if (!std::isfinite(obj.value) || !all_finite(obj.grad_beta) ||
                !all_finite(obj.grad_gamma) || !all_finite(obj.grad_theta)) {
                diverged(epoch, config.learning_rate);
            }
            epoch_loss += obj.value * static_cast<double>(idx.size());
            seen += idx.size();

            std::copy(obj.grad_gamma.begin(), obj.grad_gamma.end(), grad.begin());
            std::copy(obj.grad_beta.begin(), obj.grad_beta.end(),
                      grad.begin() + static_cast<std::ptrdiff_t>(q));
            std::copy(obj.grad_theta.begin(), obj.grad_theta.end(),
                      grad.begin() + static_cast<std::ptrdiff_t>(q + p));
            adam_step(adam, flat, grad, config.learning_rate, config.adam_betas, config.adam_eps);

            std::span<double> beta(flat.data() + q, p);
            if (beta[0] < 0.0) {
                for (double& v : beta) v = -v;
                if (config.flip_momentum) {
                    for (std::size_t j = q; j < q + p; ++j) adam.m[j] = -adam.m[j];
                }
                ++result.flips;
            }
            double nrm;
            try {
                const auto proj = project_identifiable(beta);
                std::copy(proj.beta.begin(), proj.beta.end(), beta.begin());
                nrm = norm2(beta);
            } catch (const DegenerateDirectionError&) {
                diverged(epoch, config.learning_rate);
            }
            assert(std::abs(nrm - 1.0) < 1e-9 && beta[0] >= 0.0);
            (void)nrm;
            unpack(flat, params);
        }

        const double train_loss =
            seen > 0 ? epoch_loss / static_cast<double>(seen) : std::numeric_limits<double>::quiet_NaN();
        result.loss_history.push_back(train_loss);
        result.stopped_epoch = epoch;

        double vloss = std::numeric_limits<double>::quiet_NaN();
        if (early_stop) {
            try {
                vloss = validation_loss(params, val);
            } catch (const NumericError&) {
                diverged(epoch, config.learning_rate);
            }
            if (!std::isfinite(vloss)) {
                diverged(epoch, config.learning_rate);
            }
            result.validation_history.push_back(vloss);
        }
        if (progress) {
            progress({epoch, train_loss, vloss});
        }
        if (early_stop) {
            if (vloss < best_val) {
                best_val = vloss;
                best = params;
                result.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= config.early_stop_patience) {
                break;
            }
        } else {
            result.best_epoch = epoch;
        }
    }
    if (early_stop && result.best_epoch > 0) {
        params = best;
    }
    params.check_invariants();
    return result;
}

} // namespace plsinet
