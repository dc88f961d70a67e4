#include "plsinet/objectives.hpp"

#include "plsinet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace plsinet {

namespace {

void check_lengths(std::size_t a, std::size_t eta, std::span<const double> weights) {
    if (eta == 0) {
        throw EmptyDataError("loss evaluated on zero observations");
    }
    if (a != eta) {
        throw ShapeError("outcome length " + std::to_string(a) + " does not match predictor " +
                         std::to_string(eta));
    }
    if (!weights.empty() && weights.size() != eta) {
        throw ShapeError("weight length does not match predictor");
    }
}

double weight_at(std::span<const double> w, std::size_t i) {
    return w.empty() ? 1.0 : w[i];
}

double weight_sum(std::span<const double> w, std::size_t n) {
    const double s = w.empty() ? static_cast<double>(n) : std::accumulate(w.begin(), w.end(), 0.0);
    if (!(s > 0.0)) {
        throw EmptyDataError("case weights sum to zero");
    }
    return s;
}

// log(1 + e^x) without overflow.
double log1p_exp(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

LossValue loss_gaussian(std::span<const double> y, std::span<const double> eta,
                        std::span<const double> weights) {
    check_lengths(y.size(), eta.size(), weights);
    const double W = weight_sum(weights, eta.size());
    LossValue out;
    out.grad.resize(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double w = weight_at(weights, i);
        const double r = y[i] - eta[i];
        out.total += w * r * r;
        out.grad[i] = -2.0 * w * r / W;
    }
    out.total /= W;
    return out;
}

LossValue loss_binomial(std::span<const double> y, std::span<const double> eta,
                        std::span<const double> weights) {
    check_lengths(y.size(), eta.size(), weights);
    const double W = weight_sum(weights, eta.size());
    LossValue out;
    out.grad.resize(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) {
            throw DomainError("binomial outcome must be 0 or 1; observation " + std::to_string(i) +
                              " is " + std::to_string(y[i]));
        }
        const double w = weight_at(weights, i);
        out.total += w * (log1p_exp(eta[i]) - y[i] * eta[i]);
        out.grad[i] = w * (sigmoid(eta[i]) - y[i]) / W;
    }
    out.total /= W;
    return out;
}

LossValue loss_poisson(std::span<const double> y, std::span<const double> eta,
                       std::span<const double> weights) {
    check_lengths(y.size(), eta.size(), weights);
    const double W = weight_sum(weights, eta.size());
    LossValue out;
    out.grad.resize(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (y[i] < 0.0) {
            throw DomainError("poisson outcome must be non-negative; observation " +
                              std::to_string(i) + " is " + std::to_string(y[i]));
        }
        const double w = weight_at(weights, i);
        const double mu = std::exp(eta[i]);
        out.total += w * (mu - y[i] * eta[i]);
        out.grad[i] = w * (mu - y[i]) / W;
    }
    out.total /= W;
    return out;
}

LossValue loss_cox(std::span<const double> time, std::span<const double> event,
                   std::span<const double> eta, std::span<const double> weights) {
    check_lengths(time.size(), eta.size(), weights);
    if (event.size() != eta.size()) {
        throw ShapeError("event length does not match predictor");
    }
    const std::size_t n = eta.size();
    double events = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(time[i] > 0.0)) {
            throw DomainError("survival times must be positive; observation " +
                              std::to_string(i) + " is " + std::to_string(time[i]));
        }
        events += event[i] * weight_at(weights, i);
    }
    if (!(events > 0.0)) {
        throw NoEventsError("partial likelihood needs at least one observed event");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return time[a] > time[b]; });
    const double shift = *std::max_element(eta.begin(), eta.end());

    // Descending sweep: risk sums per tie group (all j with time_j >= t).
    struct Group {
        std::size_t begin, end;
        double risk;
    };
    std::vector<Group> groups;
    double risk = 0.0;
    double loglik = 0.0;
    for (std::size_t a = 0; a < n;) {
        std::size_t b = a;
        while (b < n && time[order[b]] == time[order[a]]) {
            const std::size_t j = order[b];
            risk += weight_at(weights, j) * std::exp(eta[j] - shift);
            ++b;
        }
        const double log_risk = std::log(risk);
        for (std::size_t k = a; k < b; ++k) {
            const std::size_t i = order[k];
            if (event[i] != 0.0) {
                loglik += weight_at(weights, i) * event[i] * (eta[i] - shift - log_risk);
            }
        }
        groups.push_back({a, b, risk});
        a = b;
    }

    // Ascending sweep: accumulate sum over events with time_i <= time_k of w_i / risk_i.
    LossValue out;
    out.total = -loglik / events;
    out.grad.assign(n, 0.0);
    double acc = 0.0;
    for (std::size_t g = groups.size(); g-- > 0;) {
        const auto& G = groups[g];
        for (std::size_t k = G.begin; k < G.end; ++k) {
            const std::size_t i = order[k];
            acc += weight_at(weights, i) * event[i] / G.risk;
        }
        for (std::size_t k = G.begin; k < G.end; ++k) {
            const std::size_t j = order[k];
            const double w = weight_at(weights, j);
            out.grad[j] = (w * std::exp(eta[j] - shift) * acc - w * event[j]) / events;
        }
    }
    return out;
}

LossValue evaluate_loss(const Outcome& outcome, std::span<const double> eta,
                        std::span<const double> weights) {
    switch (outcome.family) {
    case Family::gaussian: return loss_gaussian(outcome.y, eta, weights);
    case Family::binomial: return loss_binomial(outcome.y, eta, weights);
    case Family::poisson: return loss_poisson(outcome.y, eta, weights);
    case Family::cox: return loss_cox(outcome.time, outcome.event, eta, weights);
    }
    throw UnsupportedFamilyError("unknown outcome family");
}

PenaltyValue anchoring_penalty(const MlpParams& theta, const MlpSpec& spec, double weight) {
    if (weight < 0.0) {
        throw DomainError("anchoring weight must be non-negative");
    }
    PenaltyValue out;
    if (weight == 0.0) {
        out.grad_theta.assign(theta.flat.size(), 0.0);
        return out;
    }
    const double origin[1] = {0.0};
    auto fwd = forward(theta, spec, origin);
    const double g0 = fwd.outputs[0];
    out.value = weight * g0 * g0;
    const double up[1] = {2.0 * weight * g0};
    out.grad_theta = backward(fwd.tape, up).theta;
    return out;
}

} // namespace plsinet
