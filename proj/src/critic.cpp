#include "critic.hpp"

#include <cmath>

#include "errors.hpp"

namespace sigent {

void CriticConfig::validate() const {
    require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::Config, "critic.gamma must lie in [0, 1]");
    require(alpha >= 0.0, ErrorKind::Config, "critic.alpha must be non-negative");
    require(beta > 0.0, ErrorKind::Config, "critic.beta must be positive");
    require(lambda_ood >= 0.0, ErrorKind::Config, "critic.lambda_ood must be non-negative");
    require(n_ood >= 0, ErrorKind::Config, "critic.n_ood must be non-negative");
    require(tau > 0.0 && tau <= 1.0, ErrorKind::Config, "critic.tau must lie in (0, 1]");
}

CriticEnsemble CriticEnsemble::make(int state_dim, int action_dim, const std::vector<int>& hidden,
                                    Activation act, double lr, Rng& rng) {
    require(state_dim > 0 && action_dim > 0, ErrorKind::Config, "critic dims must be positive");
    std::vector<int> sizes;
    sizes.push_back(state_dim + action_dim);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(1);

    CriticEnsemble c;
    c.action_dim_ = action_dim;
    c.q1 = Mlp(sizes, act);
    c.q2 = Mlp(sizes, act);
    c.q1.init(rng);
    c.q2.init(rng);
    c.q1_target = c.q1;
    c.q2_target = c.q2;
    c.opt_q1 = AdamState(c.q1, lr);
    c.opt_q2 = AdamState(c.q2, lr);
    return c;
}

void CriticEnsemble::soft_update_targets(double tau) {
    soft_update(q1_target, q1, tau);
    soft_update(q2_target, q2, tau);
}

namespace {

Matrix concat_state_action(const Matrix& states, const Matrix& actions) {
    require(states.rows() == actions.rows(), ErrorKind::Structural,
            "state/action batch row mismatch");
    Matrix in(states.rows(), states.cols() + actions.cols());
    in.leftCols(states.cols()) = states;
    in.rightCols(actions.cols()) = actions;
    return in;
}

}  // namespace

Vector q_values(const Mlp& q, const Matrix& states, const Matrix& actions) {
    const Matrix in = concat_state_action(states, actions);
    require(in.cols() == q.input_dim(), ErrorKind::Structural, "q_values: input width mismatch");
    return q.forward(in).col(0);
}

CriticNoise draw_critic_noise(int batch_size, int action_dim, int n_ood, Rng& rng) {
    require(batch_size > 0 && action_dim > 0, ErrorKind::Structural, "draw_critic_noise: bad dims");
    require(n_ood >= 0, ErrorKind::Config, "draw_critic_noise: n_ood must be non-negative");
    CriticNoise n;
    n.eps_next = draw_noise(batch_size, action_dim, rng);
    n.eps_ood_current = draw_noise(n_ood * batch_size, action_dim, rng);
    n.eps_ood_next = draw_noise(n_ood * batch_size, action_dim, rng);
    return n;
}

Vector bellman_target(const CriticEnsemble& critic, const Mlp& policy_net,
                      const TransitionBatch& batch, const CriticConfig& cfg,
                      EntropyMode mode, const EntropyConfig& ecfg,
                      const Matrix& eps_next, BellmanDebug* debug) {
    cfg.validate();
    const int b = batch.size();
    const int d = critic.action_dim();
    require(eps_next.rows() == b && eps_next.cols() == d, ErrorKind::Structural,
            "bellman_target: eps_next shape mismatch");

    const HeadBatch heads = heads_from_net(policy_net, batch.next_states);
    const Matrix pre_squash = sample_pre_squash(heads, eps_next);
    const Matrix next_actions = pre_squash.array().tanh();
    const Matrix lp = log_prob_per_dim(heads, pre_squash);
    const Vector entropy = entropy_rows(lp, mode, ecfg);

    const Vector q1t = q_values(critic.q1_target, batch.next_states, next_actions);
    const Vector q2t = q_values(critic.q2_target, batch.next_states, next_actions);
    const Vector min_q = q1t.cwiseMin(q2t);

    Vector y(b);
    for (int i = 0; i < b; ++i) {
        const double not_done = 1.0 - batch.done[i];
        y[i] = batch.rewards[i] + not_done * cfg.gamma * (min_q[i] + cfg.alpha * entropy[i]);
    }
    if (debug) {
        debug->next_actions = next_actions;
        debug->next_entropy = entropy;
        debug->q1_target = q1t;
        debug->q2_target = q2t;
    }
    return y;
}

Matrix ood_action_set(const Mlp& policy_net, const TransitionBatch& batch, int n_ood,
                      const Matrix& eps_ood_current, const Matrix& eps_ood_next) {
    const int b = batch.size();
    require(n_ood >= 0, ErrorKind::Config, "ood_action_set: n_ood must be non-negative");
    if (n_ood == 0) return Matrix(0, policy_net.output_dim() / 2);

    const HeadBatch heads_cur = heads_from_net(policy_net, batch.states);
    const HeadBatch heads_next = heads_from_net(policy_net, batch.next_states);
    const int d = static_cast<int>(heads_cur.mu.cols());
    require(eps_ood_current.rows() == n_ood * b && eps_ood_current.cols() == d,
            ErrorKind::Structural, "ood_action_set: eps_ood_current shape mismatch");
    require(eps_ood_next.rows() == n_ood * b && eps_ood_next.cols() == d,
            ErrorKind::Structural, "ood_action_set: eps_ood_next shape mismatch");

    Matrix out(2 * n_ood * b, d);
    for (int j = 0; j < n_ood; ++j) {
        const Matrix x = sample_pre_squash(heads_cur, eps_ood_current.middleRows(j * b, b));
        out.middleRows(j * b, b) = x.array().tanh();
    }
    for (int j = 0; j < n_ood; ++j) {
        const Matrix x = sample_pre_squash(heads_next, eps_ood_next.middleRows(j * b, b));
        out.middleRows((n_ood + j) * b, b) = x.array().tanh();
    }
    return out;
}

namespace {

struct PerCriticNodes {
    Value loss, td, cql;
};

// Stacks [data action | OOD actions] row blocks through one Q net and builds
// TD + conservative terms. ood_actions may have zero rows.
PerCriticNodes one_critic_loss(Tape& t, const TapeNet& q, const TransitionBatch& batch,
                               const Matrix& ood_actions, const Vector& y,
                               const CriticConfig& cfg) {
    const int b = batch.size();
    const int n_blocks = 1 + static_cast<int>(ood_actions.rows()) / b;

    Matrix stacked(n_blocks * b, batch.states.cols() + batch.actions.cols());
    stacked.topRows(b) = concat_state_action(batch.states, batch.actions);
    for (int j = 1; j < n_blocks; ++j) {
        stacked.middleRows(j * b, b) =
            concat_state_action(batch.states, ood_actions.middleRows((j - 1) * b, b));
    }

    const Value q_col = q.apply(t, t.constant(std::move(stacked)));
    const Value q_mat = t.cols_from_row_blocks(q_col, n_blocks);  // B x n_blocks
    const Value q_data = t.slice_cols(q_mat, 0, 1);               // B x 1

    PerCriticNodes out;
    const Value diff = t.sub(q_data, t.constant(y));
    out.td = t.mean_all(t.mul(diff, diff));

    if (n_blocks > 1) {
        Value q_ood = t.slice_cols(q_mat, 1, n_blocks - 1);  // B x 2n
        if (cfg.use_mc_lower_bound) {
            require(batch.has_return_to_go, ErrorKind::Config,
                    "conservative term needs return_to_go when the Monte-Carlo bound is on");
            Matrix g = batch.return_to_go.replicate(1, n_blocks - 1);
            q_ood = t.max(q_ood, t.constant(std::move(g)));
        }
        const Value q_tilde = t.concat_cols(q_data, q_ood);
        const Value lse = t.row_log_sum_exp(t.scale(q_tilde, 1.0 / cfg.beta));
        out.cql = t.mean_all(t.sub(t.scale(lse, cfg.beta), q_data));
    } else {
        // Single-entry logsumexp collapses: beta * (Q/beta) - Q = 0.
        out.cql = t.constant(Matrix::Zero(1, 1));
    }

    out.loss = cfg.lambda_ood != 0.0 ? t.add(out.td, t.scale(out.cql, cfg.lambda_ood)) : out.td;
    return out;
}

}  // namespace

CriticLossNodes critic_loss_on_tape(Tape& t, const CriticEnsemble& critic, const Mlp& policy_net,
                                    const TransitionBatch& batch, const CriticConfig& cfg,
                                    EntropyMode mode, const EntropyConfig& ecfg,
                                    const CriticNoise& noise, bool trainable) {
    cfg.validate();
    const Vector y = bellman_target(critic, policy_net, batch, cfg, mode, ecfg, noise.eps_next);

    Matrix ood;
    if (cfg.lambda_ood != 0.0 && cfg.n_ood > 0) {
        ood = ood_action_set(policy_net, batch, cfg.n_ood, noise.eps_ood_current, noise.eps_ood_next);
    } else {
        ood = Matrix(0, critic.action_dim());
    }

    CriticLossNodes nodes;
    nodes.q1 = put_on_tape(t, critic.q1, trainable);
    nodes.q2 = put_on_tape(t, critic.q2, trainable);
    const PerCriticNodes n1 = one_critic_loss(t, nodes.q1, batch, ood, y, cfg);
    const PerCriticNodes n2 = one_critic_loss(t, nodes.q2, batch, ood, y, cfg);
    nodes.loss_q1 = n1.loss;
    nodes.loss_q2 = n2.loss;
    nodes.td_q1 = n1.td;
    nodes.td_q2 = n2.td;
    nodes.cql_q1 = n1.cql;
    nodes.cql_q2 = n2.cql;
    nodes.loss_total = t.add(n1.loss, n2.loss);
    nodes.target = y;
    return nodes;
}

CriticUpdateResult critic_update(CriticEnsemble& critic, const Mlp& policy_net,
                                 const TransitionBatch& batch, const CriticConfig& cfg,
                                 EntropyMode mode, const EntropyConfig& ecfg,
                                 const CriticNoise& noise) {
    Tape t;
    const CriticLossNodes nodes =
        critic_loss_on_tape(t, critic, policy_net, batch, cfg, mode, ecfg, noise, true);
    t.backward(nodes.loss_total);

    CriticUpdateResult r;
    r.loss_q1 = t.scalar(nodes.loss_q1);
    r.loss_q2 = t.scalar(nodes.loss_q2);
    r.td_q1 = t.scalar(nodes.td_q1);
    r.td_q2 = t.scalar(nodes.td_q2);
    r.cql_q1 = t.scalar(nodes.cql_q1);
    r.cql_q2 = t.scalar(nodes.cql_q2);
    r.mean_target = nodes.target.size() > 0 ? nodes.target.mean() : 0.0;
    {
        const Vector v1 = q_values(critic.q1, batch.states, batch.actions);
        const Vector v2 = q_values(critic.q2, batch.states, batch.actions);
        r.mean_q = v1.cwiseMin(v2).mean();
    }

    const MlpGrads g1 = collect_grads(t, nodes.q1);
    const MlpGrads g2 = collect_grads(t, nodes.q2);
    apply_update(critic.q1, g1, critic.opt_q1, "q1");
    apply_update(critic.q2, g2, critic.opt_q2, "q2");
    return r;
}

CriticUpdateResult critic_update(CriticEnsemble& critic, const Mlp& policy_net,
                                 const TransitionBatch& batch, const CriticConfig& cfg,
                                 EntropyMode mode, const EntropyConfig& ecfg, Rng& rng) {
    const CriticNoise noise =
        draw_critic_noise(batch.size(), critic.action_dim(), cfg.n_ood, rng);
    return critic_update(critic, policy_net, batch, cfg, mode, ecfg, noise);
}

}  // namespace sigent
