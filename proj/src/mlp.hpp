#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"

namespace sigent {

enum class Activation { Relu, Tanh };

// Fully connected network with linear output layer. Weights are (out x in),
// biases are (1 x out) row vectors; inputs are batched as one row per sample.
struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
    Activation hidden_activation = Activation::Relu;

    Mlp() = default;
    Mlp(std::vector<int> sizes, Activation act);

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }
    bool same_architecture(const Mlp& other) const;
    void assert_finite(const std::string& label) const;

    // Uniform +-1/sqrt(fan_in) init; final_layer_scale shrinks the last layer
    // (policies start near the identity-zero action).
    void init(Rng& rng, double final_layer_scale = 1.0);

    Vector forward(const Vector& input) const;
    Matrix forward(const Matrix& inputs) const;
};

// Per-parameter gradients in the same shapes as the network.
struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
};

// View of an Mlp's parameters registered on a tape. With trainable=false the
// parameters enter as constants: gradients still flow through the graph to
// the inputs but none accumulate on the network itself.
struct TapeNet {
    const Mlp* net = nullptr;
    std::vector<Value> weight_nodes;
    std::vector<Value> bias_nodes;

    Value apply(Tape& t, Value input) const;
};

TapeNet put_on_tape(Tape& t, const Mlp& net, bool trainable);
MlpGrads collect_grads(const Tape& t, const TapeNet& tn);

// Adaptive moment estimation with bias correction.
struct AdamState {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<Matrix> m_w, v_w, m_b, v_b;

    AdamState() = default;
    AdamState(const Mlp& net, double lr);
};

// One optimizer step. Throws a numeric error naming the offending parameter
// when a gradient is non-finite.
void apply_update(Mlp& net, const MlpGrads& grads, AdamState& opt, const std::string& label);

// target <- tau * online + (1 - tau) * target
void soft_update(Mlp& target, const Mlp& online, double tau);

// Versioned flat binary: "SGNT" magic, u32 version, u32 layer count, u32
// activation tag, then per layer u32 in/out dims followed by row-major
// little-endian f64 weights and biases.
void save_mlp(const Mlp& net, std::ostream& out);
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(std::istream& in);
Mlp load_mlp(const std::string& path);

constexpr uint32_t kMlpFormatVersion = 1;

}  // namespace sigent
