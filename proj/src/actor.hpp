#pragma once

#include <vector>

#include "critic.hpp"
#include "mlp.hpp"
#include "policy.hpp"

namespace sigent {

// Which disagreement measure opens the imitation gate.
enum class GateMode { L2Norm, PerDimMse };

struct GbcConfig {
    GateMode gate_mode = GateMode::PerDimMse;
    double epsilon = 0.3;     // L2Norm threshold on ||mean - expert||_2
    double epsilon_bc = 0.3;  // PerDimMse threshold: mean squared error > epsilon_bc^2
    double lambda_bc = 1.0;   // penalty weight in the objective

    void validate() const;
};

// 1 when the policy mean action disagrees with the expert action enough to
// re-enable cloning, else 0. Strict inequality at the threshold.
double gate(const Vector& mean_action, const Vector& expert_action, const GbcConfig& cfg);
Vector gates(const Matrix& mean_actions, const Matrix& expert_actions, const GbcConfig& cfg);

// mean_i gate_i * ||mean_i - expert_i||_2^2 over the expert batch.
double gbc_penalty(const Matrix& mean_actions, const Matrix& expert_actions, const GbcConfig& cfg);

enum class QMode { MinQ, Q1Only };

struct ActorConfig {
    double alpha = 0.2;  // entropy bonus weight
    QMode q_mode = QMode::MinQ;
    EntropyMode entropy_mode = EntropyMode::Sigmoid;
    EntropyConfig entropy;
    GbcConfig gbc;
};

struct Actor {
    Mlp net;
    AdamState opt;

    static Actor make(int state_dim, int action_dim, const std::vector<int>& hidden,
                      Activation act, double lr, Rng& rng);
};

struct ActorLossNodes {
    TapeNet policy;
    Value loss;          // negated objective
    Value objective;     // mean Q(s, a_pi) + alpha * mean H - lambda_bc * bc_term
    Value q_term;        // mean Q at freshly sampled actions
    Value entropy_term;  // mean entropy estimate at those samples
    Value bc_term;       // gated imitation penalty; constant 0 without expert rows
    Vector gate_values;  // plain 0/1 per expert row (empty without expert rows)
};

// Builds the policy loss. Critic parameters enter as constants so gradients
// reach only the policy. The imitation term compares the deterministic mean
// action against expert actions; its gate is a plain 0/1 constant.
// expert_states/expert_actions may be null (pure actor-critic objective).
ActorLossNodes actor_loss_on_tape(Tape& t, const Mlp& policy_net, const CriticEnsemble& critic,
                                  const Matrix& states, const Matrix& eps,
                                  const Matrix* expert_states, const Matrix* expert_actions,
                                  const ActorConfig& cfg, bool trainable = true);

struct ActorUpdateResult {
    double loss = 0.0;
    double objective = 0.0;
    double q_term = 0.0;
    double entropy_term = 0.0;
    double bc_term = 0.0;
    double gate_fraction = 0.0;  // share of expert rows with an open gate
};

// One gradient step on the policy.
ActorUpdateResult policy_update(Actor& actor, const CriticEnsemble& critic, const Matrix& states,
                                const Matrix& eps, const Matrix* expert_states,
                                const Matrix* expert_actions, const ActorConfig& cfg);
ActorUpdateResult policy_update(Actor& actor, const CriticEnsemble& critic, const Matrix& states,
                                const Matrix* expert_states, const Matrix* expert_actions,
                                const ActorConfig& cfg, Rng& rng);

}  // namespace sigent
