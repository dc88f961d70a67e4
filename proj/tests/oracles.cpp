#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace oracle {

namespace {

double act(plsinet::Activation a, double v) {
    switch (a) {
    case plsinet::Activation::relu: return v > 0.0 ? v : 0.0;
    case plsinet::Activation::tanh: return std::tanh(v);
    case plsinet::Activation::softplus: return std::log(1.0 + std::exp(v));
    }
    return v;
}

double wt(std::span<const double> w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

double wsum(std::span<const double> w, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += wt(w, i);
    return s;
}

} // namespace

double mlp_value(const std::vector<double>& flat, const MlpSpec& spec, double s) {
    std::vector<std::size_t> widths{1};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(1);
    std::vector<double> a{s};
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        std::vector<double> z(out, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            for (std::size_t k = 0; k < in; ++k) z[o] += flat[off + k * out + o] * a[k];
            z[o] += flat[off + in * out + o];
        }
        off += in * out + out;
        const bool last = l + 2 == widths.size();
        if (!last) {
            for (double& v : z) v = act(spec.activation, v);
        }
        a = std::move(z);
    }
    return a[0];
}

double loss_gaussian(std::span<const double> y, std::span<const double> eta,
                     std::span<const double> w) {
    double t = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) t += wt(w, i) * (y[i] - eta[i]) * (y[i] - eta[i]);
    return t / wsum(w, y.size());
}

double loss_binomial(std::span<const double> y, std::span<const double> eta,
                     std::span<const double> w) {
    double t = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-eta[i]));
        t -= wt(w, i) * (y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
    }
    return t / wsum(w, y.size());
}

double loss_poisson(std::span<const double> y, std::span<const double> eta,
                    std::span<const double> w) {
    double t = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) t += wt(w, i) * (std::exp(eta[i]) - y[i] * eta[i]);
    return t / wsum(w, y.size());
}

CoxBrute cox_brute(std::span<const double> time, std::span<const double> event,
                   std::span<const double> eta, std::span<const double> w) {
    const std::size_t n = time.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d += wt(w, i) * event[i];
    CoxBrute out{0.0, std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        if (event[i] == 0.0) continue;
        double risk = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (time[j] >= time[i]) risk += wt(w, j) * std::exp(eta[j]);
        }
        out.total -= wt(w, i) * event[i] * (eta[i] - std::log(risk));
        out.grad[i] -= wt(w, i) * event[i];
        for (std::size_t k = 0; k < n; ++k) {
            if (time[k] >= time[i]) {
                out.grad[k] += wt(w, i) * event[i] * wt(w, k) * std::exp(eta[k]) / risk;
            }
        }
    }
    out.total /= d;
    for (double& g : out.grad) g /= d;
    return out;
}

double objective(const ModelParams& params, const Dataset& data, const plsinet::FitConfig& config) {
    const std::size_t n = data.n();
    std::vector<double> eta(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < params.p(); ++j) s[i] += params.beta[j] * data.X(i, j);
        eta[i] = mlp_value(params.theta.flat, params.mlp, s[i]);
        for (std::size_t k = 0; k < params.q(); ++k) eta[i] += params.gamma[k] * data.Z(i, k);
    }
    const auto& o = data.outcome;
    double v = 0.0;
    switch (o.family) {
    case plsinet::Family::gaussian: v = loss_gaussian(o.y, eta, data.weights); break;
    case plsinet::Family::binomial: v = loss_binomial(o.y, eta, data.weights); break;
    case plsinet::Family::poisson: v = loss_poisson(o.y, eta, data.weights); break;
    case plsinet::Family::cox: v = cox_brute(o.time, o.event, eta, data.weights).total; break;
    }
    const double g0 = mlp_value(params.theta.flat, params.mlp, 0.0);
    v += config.anchoring_weight * g0 * g0;
    double ss = 0.0;
    for (double si : s) ss += si * si;
    v += config.index_centering_weight * ss / static_cast<double>(n);
    return v;
}

std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double x0 = x[k];
        x[k] = x0 + h;
        const double fp = f(x);
        x[k] = x0 - h;
        const double fm = f(x);
        x[k] = x0;
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double rel_error(std::span<const double> a, std::span<const double> b, double floor) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = std::abs(a[k] - b[k]);
        if (diff < floor) continue;
        worst = std::max(worst, diff / std::max(std::abs(b[k]), 1e-3));
    }
    return worst;
}

Ols ols(const Matrix& D, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(D.rows());
    const auto k = static_cast<Eigen::Index>(D.cols());
    Eigen::MatrixXd A(n, k);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) A(i, j) = D(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        b(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::VectorXd coef = qr.solve(b);
    const Eigen::VectorXd resid = b - A * coef;
    const double sigma2 = resid.squaredNorm() / static_cast<double>(n - k);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd cov = sigma2 * Rinv * Rinv.transpose();
    Ols out;
    out.sigma2 = sigma2;
    for (Eigen::Index j = 0; j < k; ++j) {
        out.coef.push_back(coef(j));
        out.se.push_back(std::sqrt(cov(j, j)));
    }
    return out;
}

std::vector<double> sandwich_se(const Matrix& D, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(D.rows());
    const auto k = static_cast<Eigen::Index>(D.cols());
    Eigen::MatrixXd A(n, k);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) A(i, j) = D(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        b(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd e = b - A * coef;
    const Eigen::MatrixXd bread = (A.transpose() * A).inverse();
    const Eigen::MatrixXd meat = A.transpose() * e.array().square().matrix().asDiagonal() * A;
    const Eigen::MatrixXd cov = bread * meat * bread;
    std::vector<double> se;
    for (Eigen::Index j = 0; j < k; ++j) se.push_back(std::sqrt(cov(j, j)));
    return se;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
    Matrix m(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) m(i, a.cols() + j) = b(i, j);
    }
    return m;
}

} // namespace oracle
