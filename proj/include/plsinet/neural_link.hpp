#pragma once

#include "plsinet/numerics.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace plsinet {

enum class Activation { relu, tanh, softplus };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

/// Shape of the scalar link network g: R -> R. Input and output widths are 1.
struct MlpSpec {
    std::vector<std::size_t> hidden{64, 64};
    Activation activation = Activation::tanh;

    void validate() const;
    std::size_t layer_count() const noexcept { return hidden.size() + 1; }
    std::size_t param_count() const;

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Where one affine layer lives inside MlpParams::flat.
///
/// Layers are stored in order input -> output. Each layer contributes its
/// out x in weight matrix in column-major order (W(o, k) at
/// weight_offset + k * out + o) followed by its out biases.
struct LayerLayout {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
};

std::vector<LayerLayout> layer_layout(const MlpSpec& spec);

struct MlpParams {
    std::vector<double> flat;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

MlpParams zero_params(const MlpSpec& spec);

/// He initialisation: weights N(0, 2 / fan_in), biases zero.
MlpParams he_init(Rng& rng, const MlpSpec& spec);

/// Activation cache from a forward pass. Borrows the parameter vector, which
/// must outlive the tape.
class ForwardTape {
public:
    std::size_t batch_size() const noexcept { return n_; }

private:
    friend struct ForwardAccess;
    MlpSpec spec_;
    std::span<const double> params_;
    std::size_t n_ = 0;
    // post-activation values per layer boundary, width x n column-major;
    // activations_[0] holds the inputs.
    std::vector<std::vector<double>> activations_;
};

struct ForwardResult {
    std::vector<double> outputs;
    ForwardTape tape;
};

ForwardResult forward(const MlpParams& params, const MlpSpec& spec, std::span<const double> s);

/// Forward pass without keeping a tape.
std::vector<double> evaluate(const MlpParams& params, const MlpSpec& spec,
                             std::span<const double> s);
double evaluate_at(const MlpParams& params, const MlpSpec& spec, double s);

struct MlpGradients {
    std::vector<double> theta;
    std::vector<double> s;
};

/// Reverse-mode gradients of sum_i upstream[i] * g(s_i).
MlpGradients backward(const ForwardTape& tape, std::span<const double> upstream);

} // namespace plsinet
