#include "plsinet/neural_link.hpp"

#include "plsinet/errors.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

namespace plsinet {

namespace {

using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

void apply_activation(Activation act, Eigen::MatrixXd& z) {
    switch (act) {
    case Activation::relu:
        z = z.cwiseMax(0.0);
        break;
    case Activation::tanh:
        // exp is vectorised by Eigen; the form saturates cleanly at +-1.
        z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
        break;
    case Activation::softplus:
        z = z.array().max(0.0) + (-z.array().abs()).exp().log1p();
        break;
    }
}

// Derivative of the activation expressed through its output value a.
void multiply_derivative(Activation act, const Eigen::MatrixXd& a, Eigen::MatrixXd& d) {
    switch (act) {
    case Activation::relu:
        d = (a.array() > 0.0).select(d, 0.0);
        break;
    case Activation::tanh:
        d.array() *= 1.0 - a.array().square();
        break;
    case Activation::softplus:
        // sigmoid(z) = 1 - exp(-softplus(z))
        d.array() *= -((-a.array()).unaryExpr([](double v) { return std::expm1(v); }));
        break;
    }
}

Eigen::MatrixXd run_forward(std::span<const double> params, const MlpSpec& spec,
                            std::span<const double> s,
                            std::vector<std::vector<double>>* keep) {
    const auto layout = layer_layout(spec);
    if (params.size() != spec.param_count()) {
        throw ShapeError("network parameter length " + std::to_string(params.size()) +
                         " does not match spec (" + std::to_string(spec.param_count()) + ")");
    }
    const auto n = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd act = Eigen::Map<const Eigen::RowVectorXd>(s.data(), n);
    if (!act.allFinite()) {
        throw NumericError("network input contains non-finite index values");
    }
    if (keep != nullptr) {
        keep->assign(1, std::vector<double>(s.begin(), s.end()));
    }
    for (std::size_t l = 0; l < layout.size(); ++l) {
        const auto& L = layout[l];
        // Owned copies keep Eigen's vectorised reductions independent of the
        // caller's buffer alignment, so results are reproducible bit for bit.
        const Eigen::MatrixXd W = ConstMatrixMap(params.data() + L.weight_offset,
                                                 static_cast<Eigen::Index>(L.out),
                                                 static_cast<Eigen::Index>(L.in));
        const Eigen::VectorXd b = ConstVectorMap(params.data() + L.bias_offset,
                                                 static_cast<Eigen::Index>(L.out));
        Eigen::MatrixXd z = W * act;
        z.colwise() += b;
        if (l + 1 < layout.size()) {
            apply_activation(spec.activation, z);
        }
        if (!z.allFinite()) {
            throw NumericError("non-finite activation in layer " + std::to_string(l + 1) + " of " +
                               std::to_string(layout.size()));
        }
        act = std::move(z);
        if (keep != nullptr && l + 1 < layout.size()) {
            keep->emplace_back(act.data(), act.data() + act.size());
        }
    }
    return act;
}

} // namespace

struct ForwardAccess {
    static ForwardTape make(const MlpSpec& spec, std::span<const double> params, std::size_t n,
                            std::vector<std::vector<double>> acts) {
        ForwardTape t;
        t.spec_ = spec;
        t.params_ = params;
        t.n_ = n;
        t.activations_ = std::move(acts);
        return t;
    }
    static const MlpSpec& spec(const ForwardTape& t) { return t.spec_; }
    static std::span<const double> params(const ForwardTape& t) { return t.params_; }
    static const std::vector<std::vector<double>>& acts(const ForwardTape& t) {
        return t.activations_;
    }
};

std::string_view to_string(Activation a) noexcept {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    }
    return "unknown";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "softplus") return Activation::softplus;
    throw DomainError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
    if (hidden.empty()) {
        throw DomainError("network needs at least one hidden layer");
    }
    for (std::size_t w : hidden) {
        if (w == 0) {
            throw DomainError("hidden layer widths must be positive");
        }
    }
}

std::size_t MlpSpec::param_count() const {
    std::size_t total = 0;
    std::size_t in = 1;
    for (std::size_t w : hidden) {
        total += in * w + w;
        in = w;
    }
    return total + in + 1;
}

std::vector<LayerLayout> layer_layout(const MlpSpec& spec) {
    spec.validate();
    std::vector<LayerLayout> out;
    out.reserve(spec.layer_count());
    std::size_t in = 1;
    std::size_t offset = 0;
    auto push = [&](std::size_t width) {
        out.push_back({in, width, offset, offset + in * width});
        offset += in * width + width;
        in = width;
    };
    for (std::size_t w : spec.hidden) {
        push(w);
    }
    push(1);
    return out;
}

MlpParams zero_params(const MlpSpec& spec) {
    return MlpParams{std::vector<double>(spec.param_count(), 0.0)};
}

MlpParams he_init(Rng& rng, const MlpSpec& spec) {
    MlpParams p = zero_params(spec);
    for (const auto& L : layer_layout(spec)) {
        const double sd = std::sqrt(2.0 / static_cast<double>(L.in));
        for (std::size_t i = 0; i < L.in * L.out; ++i) {
            p.flat[L.weight_offset + i] = sd * rng.normal();
        }
    }
    return p;
}

ForwardResult forward(const MlpParams& params, const MlpSpec& spec, std::span<const double> s) {
    std::vector<std::vector<double>> acts;
    Eigen::MatrixXd out = run_forward(params.flat, spec, s, &acts);
    ForwardResult r;
    r.outputs.assign(out.data(), out.data() + out.size());
    r.tape = ForwardAccess::make(spec, params.flat, s.size(), std::move(acts));
    return r;
}

std::vector<double> evaluate(const MlpParams& params, const MlpSpec& spec,
                             std::span<const double> s) {
    Eigen::MatrixXd out = run_forward(params.flat, spec, s, nullptr);
    return {out.data(), out.data() + out.size()};
}

double evaluate_at(const MlpParams& params, const MlpSpec& spec, double s) {
    const double in[1] = {s};
    return evaluate(params, spec, in)[0];
}

MlpGradients backward(const ForwardTape& tape, std::span<const double> upstream) {
    const auto& spec = ForwardAccess::spec(tape);
    const auto params = ForwardAccess::params(tape);
    const auto& acts = ForwardAccess::acts(tape);
    const std::size_t n = tape.batch_size();
    if (upstream.size() != n) {
        throw ShapeError("backward: upstream length " + std::to_string(upstream.size()) +
                         " does not match tape batch " + std::to_string(n));
    }
    const auto layout = layer_layout(spec);
    const auto cols = static_cast<Eigen::Index>(n);

    MlpGradients g;
    g.theta.assign(params.size(), 0.0);
    Eigen::MatrixXd delta = Eigen::Map<const Eigen::RowVectorXd>(upstream.data(), cols);

    for (std::size_t l = layout.size(); l-- > 0;) {
        const auto& L = layout[l];
        const auto in = static_cast<Eigen::Index>(L.in);
        const auto out = static_cast<Eigen::Index>(L.out);
        const Eigen::MatrixXd a_in = ConstMatrixMap(acts[l].data(), in, cols);
        const Eigen::MatrixXd W = ConstMatrixMap(params.data() + L.weight_offset, out, in);
        const Eigen::MatrixXd gW = delta * a_in.transpose();
        const Eigen::VectorXd gb = delta.rowwise().sum();
        MatrixMap(g.theta.data() + L.weight_offset, out, in) = gW;
        Eigen::Map<Eigen::VectorXd>(g.theta.data() + L.bias_offset, out) = gb;
        Eigen::MatrixXd prev = W.transpose() * delta;
        if (l > 0) {
            multiply_derivative(spec.activation, a_in, prev);
        }
        delta = std::move(prev);
    }
    g.s.assign(delta.data(), delta.data() + delta.size());
    return g;
}

} // namespace plsinet
