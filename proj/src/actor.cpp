#include "actor.hpp"

#include <cmath>

#include "errors.hpp"

namespace sigent {

void GbcConfig::validate() const {
    require(epsilon > 0.0, ErrorKind::Config, "gbc.epsilon must be positive");
    require(epsilon_bc > 0.0, ErrorKind::Config, "gbc.epsilon_bc must be positive");
    require(lambda_bc >= 0.0, ErrorKind::Config, "gbc.lambda_bc must be non-negative");
}

double gate(const Vector& mean_action, const Vector& expert_action, const GbcConfig& cfg) {
    cfg.validate();
    require(mean_action.size() == expert_action.size(), ErrorKind::Structural,
            "gate: action dimension mismatch");
    const double sq = (mean_action - expert_action).squaredNorm();
    if (cfg.gate_mode == GateMode::L2Norm) {
        return std::sqrt(sq) > cfg.epsilon ? 1.0 : 0.0;
    }
    const double per_dim_mse = sq / static_cast<double>(mean_action.size());
    return per_dim_mse > cfg.epsilon_bc * cfg.epsilon_bc ? 1.0 : 0.0;
}

Vector gates(const Matrix& mean_actions, const Matrix& expert_actions, const GbcConfig& cfg) {
    require(mean_actions.rows() == expert_actions.rows() &&
                mean_actions.cols() == expert_actions.cols(),
            ErrorKind::Structural, "gates: shape mismatch");
    Vector g(mean_actions.rows());
    for (int i = 0; i < mean_actions.rows(); ++i) {
        g[i] = gate(mean_actions.row(i).transpose(), expert_actions.row(i).transpose(), cfg);
    }
    return g;
}

double gbc_penalty(const Matrix& mean_actions, const Matrix& expert_actions, const GbcConfig& cfg) {
    require(mean_actions.rows() > 0, ErrorKind::Config, "gbc penalty needs a non-empty expert batch");
    const Vector g = gates(mean_actions, expert_actions, cfg);
    double total = 0.0;
    for (int i = 0; i < mean_actions.rows(); ++i) {
        total += g[i] * (mean_actions.row(i) - expert_actions.row(i)).squaredNorm();
    }
    return total / static_cast<double>(mean_actions.rows());
}

Actor Actor::make(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act,
                  double lr, Rng& rng) {
    Actor a;
    a.net = make_policy_net(state_dim, action_dim, hidden, act);
    a.net.init(rng, 0.01);
    a.opt = AdamState(a.net, lr);
    return a;
}

ActorLossNodes actor_loss_on_tape(Tape& t, const Mlp& policy_net, const CriticEnsemble& critic,
                                  const Matrix& states, const Matrix& eps,
                                  const Matrix* expert_states, const Matrix* expert_actions,
                                  const ActorConfig& cfg, bool trainable) {
    cfg.gbc.validate();
    require(cfg.alpha >= 0.0, ErrorKind::Config, "actor alpha must be non-negative");
    require((expert_states == nullptr) == (expert_actions == nullptr), ErrorKind::Structural,
            "expert states and actions must be given together");

    ActorLossNodes nodes;
    nodes.policy = put_on_tape(t, policy_net, trainable);
    const TapeNet q1 = put_on_tape(t, critic.q1, false);
    const TapeNet q2 = put_on_tape(t, critic.q2, false);

    const Value state_const = t.constant(states);
    const PolicySampleNodes pi = sample_on_tape(t, nodes.policy, state_const, eps);

    const Value q_in = t.concat_cols(state_const, pi.action);
    const Value q1_pi = q1.apply(t, q_in);
    Value q_pi = q1_pi;
    if (cfg.q_mode == QMode::MinQ) {
        q_pi = t.min(q1_pi, q2.apply(t, q_in));
    }
    nodes.q_term = t.mean_all(q_pi);

    const Value entropy = entropy_on_tape(t, pi.per_dim_log_prob, cfg.entropy_mode, cfg.entropy);
    nodes.entropy_term = t.mean_all(entropy);

    Value objective = t.add(nodes.q_term, t.scale(nodes.entropy_term, cfg.alpha));

    if (expert_states != nullptr && expert_states->rows() > 0) {
        require(expert_states->rows() == expert_actions->rows(), ErrorKind::Structural,
                "expert batch row mismatch");
        const Matrix plain_means = mean_actions(heads_from_net(policy_net, *expert_states));
        nodes.gate_values = gates(plain_means, *expert_actions, cfg.gbc);

        const Value mean_node = mean_action_on_tape(t, nodes.policy, t.constant(*expert_states));
        const Value diff = t.sub(mean_node, t.constant(*expert_actions));
        const Value row_sq = t.row_sum(t.mul(diff, diff));                 // E x 1
        const Value gated = t.mul(row_sq, t.constant(nodes.gate_values));  // E x 1
        nodes.bc_term = t.mean_all(gated);
        if (cfg.gbc.lambda_bc != 0.0) {
            objective = t.sub(objective, t.scale(nodes.bc_term, cfg.gbc.lambda_bc));
        }
    } else {
        nodes.bc_term = t.constant(Matrix::Zero(1, 1));
    }

    nodes.objective = objective;
    nodes.loss = t.neg(objective);
    return nodes;
}

ActorUpdateResult policy_update(Actor& actor, const CriticEnsemble& critic, const Matrix& states,
                                const Matrix& eps, const Matrix* expert_states,
                                const Matrix* expert_actions, const ActorConfig& cfg) {
    Tape t;
    const ActorLossNodes nodes = actor_loss_on_tape(t, actor.net, critic, states, eps,
                                                    expert_states, expert_actions, cfg, true);
    t.backward(nodes.loss);

    ActorUpdateResult r;
    r.loss = t.scalar(nodes.loss);
    r.objective = t.scalar(nodes.objective);
    r.q_term = t.scalar(nodes.q_term);
    r.entropy_term = t.scalar(nodes.entropy_term);
    r.bc_term = t.scalar(nodes.bc_term);
    r.gate_fraction = nodes.gate_values.size() > 0 ? nodes.gate_values.mean() : 0.0;

    const MlpGrads g = collect_grads(t, nodes.policy);
    apply_update(actor.net, g, actor.opt, "policy");
    return r;
}

ActorUpdateResult policy_update(Actor& actor, const CriticEnsemble& critic, const Matrix& states,
                                const Matrix* expert_states, const Matrix* expert_actions,
                                const ActorConfig& cfg, Rng& rng) {
    const Matrix eps =
        draw_noise(static_cast<int>(states.rows()), critic.action_dim(), rng);
    return policy_update(actor, critic, states, eps, expert_states, expert_actions, cfg);
}

}  // namespace sigent
