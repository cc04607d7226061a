#pragma once

#include "mlp.hpp"

namespace sigent {

// Policy head: pre-squash Gaussian parameters for one state. log_sigma is
// clamped to [-5, 2] when the head comes out of a network.
struct GaussianHead {
    Vector mu;
    Vector log_sigma;
};

struct SquashedSample {
    Vector pre_squash;        // x = mu + sigma * eps
    Vector action;            // tanh(x), componentwise in (-1, 1)
    Vector per_dim_log_prob;  // log pi_i(a_i | s)
    Vector noise;             // the eps draw, kept for reparameterized paths
};

struct EntropyConfig {
    double h_max = 1.0;  // per-dimension entropy cap
    double m = 0.0;      // sigmoid center offset
    double t = 1.0;      // sigmoid temperature
};

enum class EntropyMode { Sigmoid, Negative };

constexpr double kLogSigmaMin = -5.0;
constexpr double kLogSigmaMax = 2.0;

// Policy networks output 2*action_dim values: mu then log_sigma.
Mlp make_policy_net(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act);

GaussianHead head_from_net(const Mlp& net, const Vector& state);

SquashedSample sample(const GaussianHead& head, Rng& rng);
SquashedSample sample_with_noise(const GaussianHead& head, const Vector& eps);

// Per-dimension log-density of the squashed policy at a given pre-squash x.
// Uses log(1 - tanh(x)^2) = 2*(log 2 - x - softplus(-2x)); finite for |x|
// up to a few hundred.
Vector log_prob_per_dim(const GaussianHead& head, const Vector& pre_squash);

Vector mean_action(const GaussianHead& head);

// Eq-style bounded entropy: sum_i h_max * sigmoid((s_i - m)/t) with
// s_i = -log pi_i. Strictly inside (0, d*h_max).
double sigmoid_entropy(const Vector& per_dim_log_prob, const EntropyConfig& cfg);

// Unbounded surrogate used by the negative-entropy ablation: -log pi(a|s).
double default_entropy(const Vector& per_dim_log_prob);

double entropy_estimate(const Vector& per_dim_log_prob, EntropyMode mode, const EntropyConfig& cfg);

// ---- batched plain math (no gradients), one row per sample ----

struct HeadBatch {
    Matrix mu;         // B x d
    Matrix log_sigma;  // B x d, clamped
};

HeadBatch heads_from_net(const Mlp& net, const Matrix& states);
Matrix sample_pre_squash(const HeadBatch& heads, const Matrix& eps);
Matrix log_prob_per_dim(const HeadBatch& heads, const Matrix& pre_squash);
Matrix mean_actions(const HeadBatch& heads);
Vector entropy_rows(const Matrix& per_dim_log_prob, EntropyMode mode, const EntropyConfig& cfg);
Matrix draw_noise(int rows, int cols, Rng& rng);

// ---- differentiable builders on a tape ----

struct PolicySampleNodes {
    Value mu;
    Value log_sigma;
    Value pre_squash;
    Value action;
    Value per_dim_log_prob;
};

// Reparameterized sample for a batch of states; eps enters as a constant so
// gradients flow through mu and log_sigma only.
PolicySampleNodes sample_on_tape(Tape& t, const TapeNet& policy, Value states, const Matrix& eps);

Value mean_action_on_tape(Tape& t, const TapeNet& policy, Value states);

// B x 1 column of entropy estimates.
Value entropy_on_tape(Tape& t, Value per_dim_log_prob, EntropyMode mode, const EntropyConfig& cfg);

}  // namespace sigent
