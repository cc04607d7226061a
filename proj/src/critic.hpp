#pragma once

#include <string>
#include <vector>

#include "mlp.hpp"
#include "policy.hpp"
#include "replay.hpp"

namespace sigent {

struct CriticConfig {
    double gamma = 0.99;        // discount
    double alpha = 0.2;         // entropy weight inside the target
    double beta = 1.0;          // logsumexp temperature of the conservative term
    double lambda_ood = 1.0;    // weight of the conservative term
    int n_ood = 4;              // policy samples per source state (total 2*n_ood)
    bool use_mc_lower_bound = true;  // clamp out-of-distribution Q by return-to-go
    double tau = 0.005;         // target soft-update rate

    void validate() const;
};

// Twin critics with slow-moving target copies. Q nets map [state, action]
// rows to one value.
struct CriticEnsemble {
    Mlp q1, q2, q1_target, q2_target;
    AdamState opt_q1, opt_q2;

    static CriticEnsemble make(int state_dim, int action_dim, const std::vector<int>& hidden,
                               Activation act, double lr, Rng& rng);

    int state_dim() const { return q1.input_dim() - action_dim_; }
    int action_dim() const { return action_dim_; }

    void soft_update_targets(double tau);

private:
    int action_dim_ = 0;
};

// Plain forward of one Q net over a batch.
Vector q_values(const Mlp& q, const Matrix& states, const Matrix& actions);

// All Gaussian noise one critic update consumes, drawn up front so tests can
// replay the exact update with their own arithmetic.
struct CriticNoise {
    Matrix eps_next;         // B x d, next-state policy sample for the target
    Matrix eps_ood_current;  // (n_ood*B) x d, n_ood row blocks of B
    Matrix eps_ood_next;     // (n_ood*B) x d
};

CriticNoise draw_critic_noise(int batch_size, int action_dim, int n_ood, Rng& rng);

struct BellmanDebug {
    Matrix next_actions;   // B x d
    Vector next_entropy;   // B
    Vector q1_target;      // B
    Vector q2_target;      // B
};

// y = r + (1 - done) * gamma * (min(Q1', Q2')(s', a') + alpha * H(s', a')),
// a' drawn from the policy at s'. Plain arithmetic; the result enters losses
// as a constant.
Vector bellman_target(const CriticEnsemble& critic, const Mlp& policy_net,
                      const TransitionBatch& batch, const CriticConfig& cfg,
                      EntropyMode mode, const EntropyConfig& ecfg,
                      const Matrix& eps_next, BellmanDebug* debug = nullptr);

// Stacked out-of-distribution actions, 2*n_ood row blocks of B: the first
// n_ood blocks sample the policy at the batch states, the rest at the next
// states. All Q evaluations still happen at the batch states.
Matrix ood_action_set(const Mlp& policy_net, const TransitionBatch& batch, int n_ood,
                      const Matrix& eps_ood_current, const Matrix& eps_ood_next);

struct CriticLossNodes {
    TapeNet q1, q2;
    Value loss_q1, loss_q2;  // per-critic total: TD + lambda_ood * conservative
    Value loss_total;        // sum of both (disjoint parameters)
    Value td_q1, td_q2;
    Value cql_q1, cql_q2;
    Vector target;           // the Bellman y column
};

// Builds both critic losses on the tape. The conservative term per critic is
// mean_i [ beta * log sum_{a~ in {a_i} u OOD_i} exp(Q~(s_i, a~)/beta) - Q(s_i, a_i) ],
// where Q~ = max(Q, return_to_go) on OOD entries when the Monte-Carlo lower
// bound is enabled. With lambda_ood == 0 the OOD stack is skipped entirely.
CriticLossNodes critic_loss_on_tape(Tape& t, const CriticEnsemble& critic, const Mlp& policy_net,
                                    const TransitionBatch& batch, const CriticConfig& cfg,
                                    EntropyMode mode, const EntropyConfig& ecfg,
                                    const CriticNoise& noise, bool trainable = true);

struct CriticUpdateResult {
    double loss_q1 = 0.0;
    double loss_q2 = 0.0;
    double td_q1 = 0.0;
    double td_q2 = 0.0;
    double cql_q1 = 0.0;
    double cql_q2 = 0.0;
    double mean_q = 0.0;       // batch mean of min(Q1, Q2) at the data actions
    double mean_target = 0.0;  // batch mean of y
};

// One gradient step on both online critics. Targets are left untouched; call
// soft_update_targets separately.
CriticUpdateResult critic_update(CriticEnsemble& critic, const Mlp& policy_net,
                                 const TransitionBatch& batch, const CriticConfig& cfg,
                                 EntropyMode mode, const EntropyConfig& ecfg,
                                 const CriticNoise& noise);
CriticUpdateResult critic_update(CriticEnsemble& critic, const Mlp& policy_net,
                                 const TransitionBatch& batch, const CriticConfig& cfg,
                                 EntropyMode mode, const EntropyConfig& ecfg, Rng& rng);

}  // namespace sigent
