#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>

#include <json.hpp>

#include "errors.hpp"

namespace sigent {

namespace {

// Named sub-streams of the master seed.
constexpr uint64_t kStreamInit = 1;
constexpr uint64_t kStreamEnv = 2;
constexpr uint64_t kStreamAction = 3;
constexpr uint64_t kStreamBatch = 4;
constexpr uint64_t kStreamCritic = 5;
constexpr uint64_t kStreamActor = 6;
constexpr uint64_t kStreamEval = 7;

constexpr double kLogAlphaMin = -20.0;
constexpr double kLogAlphaMax = 5.0;

}  // namespace

void TrainConfig::validate() const {
    require(total_steps >= 0, ErrorKind::Config, "train.total_steps must be non-negative");
    require(batch_size >= 1, ErrorKind::Config, "train.batch_size must be at least 1");
    require(warmup_steps >= 0, ErrorKind::Config, "train.warmup_steps must be non-negative");
    require(eval_every >= 1, ErrorKind::Config, "train.eval_every must be positive");
    require(total_steps == 0 || eval_every <= total_steps, ErrorKind::Config,
            "train.eval_every must not exceed train.total_steps");
    require(eval_episodes >= 1, ErrorKind::Config, "train.eval_episodes must be at least 1");
    require(!hidden.empty(), ErrorKind::Config, "net.hidden must list at least one layer");
    for (int h : hidden) require(h >= 1, ErrorKind::Config, "net.hidden sizes must be positive");
    require(actor_lr > 0 && critic_lr > 0 && alpha_lr > 0, ErrorKind::Config,
            "learning rates must be positive");
    require(replay_capacity > 0, ErrorKind::Config, "replay.capacity must be positive");
    require(entropy.h_max > 0, ErrorKind::Config, "entropy.h_max must be positive");
    require(entropy.t > 0, ErrorKind::Config, "entropy.t must be positive");
    require(ood_threshold >= 0, ErrorKind::Config, "train.ood_threshold must be non-negative");
    require(early_stop_success <= 1.0, ErrorKind::Config,
            "train.early_stop_success must be at most 1");
    critic.validate();
    gbc.validate();
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<ArmOverride> normalize_for_arm(TrainConfig& cfg) {
    std::vector<ArmOverride> changes;
    if (cfg.arm != Arm::SacWithPrior) return changes;

    if (cfg.entropy_mode != EntropyMode::Negative) {
        changes.push_back({"train.entropy_mode", "sigmoid", "negative"});
        cfg.entropy_mode = EntropyMode::Negative;
    }
    if (cfg.gbc.lambda_bc != 0.0) {
        changes.push_back({"gbc.lambda_bc", fmt_double(cfg.gbc.lambda_bc), "0"});
        cfg.gbc.lambda_bc = 0.0;
    }
    if (cfg.critic.lambda_ood != 0.0) {
        changes.push_back({"critic.lambda_ood", fmt_double(cfg.critic.lambda_ood), "0"});
        cfg.critic.lambda_ood = 0.0;
    }
    if (!cfg.expert_to_buffer) {
        changes.push_back({"train.expert_to_buffer", "false", "true"});
        cfg.expert_to_buffer = true;
    }
    return changes;
}

EvalReport evaluate(const Mlp& policy_net, Env& env, int episodes, Rng& rng,
                    const CriticEnsemble* critic) {
    require(episodes >= 1, ErrorKind::Config, "evaluate: episodes must be at least 1");

    int successes = 0;
    long long total_steps = 0;
    double q_sum = 0.0;
    long long q_count = 0;

    for (int e = 0; e < episodes; ++e) {
        Vector state = env.reset(rng);
        bool success = false;
        int steps = 0;
        while (true) {
            const GaussianHead head = head_from_net(policy_net, state);
            const Vector action = mean_action(head);
            if (critic) {
                Vector in(state.size() + action.size());
                in << state, action;
                const double q1 = critic->q1.forward(in)[0];
                const double q2 = critic->q2.forward(in)[0];
                q_sum += std::min(q1, q2);
                ++q_count;
            }
            const StepResult r = env.step(action);
            ++steps;
            state = r.state;
            if (r.done) {
                success = r.success;
                break;
            }
        }
        if (success) ++successes;
        total_steps += steps;
    }

    EvalReport report;
    report.success_rate = static_cast<double>(successes) / episodes;
    report.mean_episode_steps = static_cast<double>(total_steps) / episodes;
    report.mean_q = q_count > 0 ? q_sum / static_cast<double>(q_count) : 0.0;
    return report;
}

std::vector<Transition> record_demo(Env& env, ScriptedExpert& expert, Rng& rng, int max_attempts) {
    require(max_attempts >= 1, ErrorKind::Config, "record_demo: max_attempts must be positive");
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        expert.reset();
        Vector state = env.reset(rng);
        std::vector<Transition> episode;
        bool success = false;
        while (true) {
            const Vector action = expert.act(state);
            const StepResult r = env.step(action);
            Transition t;
            t.state = state;
            t.action = action;
            t.reward = r.reward;
            t.next_state = r.state;
            t.done = r.done;
            episode.push_back(std::move(t));
            state = r.state;
            if (r.done) {
                success = r.success;
                break;
            }
        }
        if (success) return episode;
    }
    throw_error(ErrorKind::Validation,
                "expert failed to produce a successful episode in " +
                    std::to_string(max_attempts) + " attempts");
}

namespace {

// Serialized picture of the moment a loss went non-finite.
std::string divergence_snapshot(long long step, const std::string& what,
                                const TransitionBatch* batch, const Actor& actor,
                                const CriticEnsemble& critic, double alpha) {
    nlohmann::json j;
    j["step"] = step;
    j["what"] = what;
    j["alpha"] = alpha;

    auto net_norms = [](const Mlp& net) {
        std::vector<double> norms;
        for (const auto& w : net.weights) norms.push_back(w.norm());
        return norms;
    };
    j["param_norms"]["policy"] = net_norms(actor.net);
    j["param_norms"]["q1"] = net_norms(critic.q1);
    j["param_norms"]["q2"] = net_norms(critic.q2);

    if (batch) {
        auto matrix_rows = [](const Matrix& m) {
            std::vector<std::vector<double>> rows;
            for (int i = 0; i < m.rows(); ++i) {
                rows.emplace_back(m.row(i).begin(), m.row(i).end());
            }
            return rows;
        };
        j["batch"]["states"] = matrix_rows(batch->states);
        j["batch"]["actions"] = matrix_rows(batch->actions);
        j["batch"]["rewards"] = std::vector<double>(batch->rewards.begin(), batch->rewards.end());
        j["batch"]["done"] = std::vector<double>(batch->done.begin(), batch->done.end());
    }
    return j.dump(2);
}

bool all_finite(std::initializer_list<double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

TrainResult train(const TrainConfig& cfg_in, Env& env, const ExpertBuffer* expert,
                  const RunSinks& sinks) {
    TrainConfig cfg = cfg_in;
    normalize_for_arm(cfg);  // idempotent; callers usually normalized already
    cfg.validate();

    const EnvSpec& spec = env.spec();
    if (expert) {
        require(expert->size() > 0, ErrorKind::Validation, "expert buffer is empty");
        require(expert->at(0).state.size() == spec.state_dim &&
                    expert->at(0).action.size() == spec.action_dim,
                ErrorKind::Validation, "demo dimensions do not match env '" + spec.name + "'");
    }

    Rng init_rng(derive_seed(cfg.seed, kStreamInit));
    Rng env_rng(derive_seed(cfg.seed, kStreamEnv));
    Rng action_rng(derive_seed(cfg.seed, kStreamAction));
    Rng batch_rng(derive_seed(cfg.seed, kStreamBatch));
    Rng critic_rng(derive_seed(cfg.seed, kStreamCritic));
    Rng actor_rng(derive_seed(cfg.seed, kStreamActor));

    TrainResult res;
    res.actor = Actor::make(spec.state_dim, spec.action_dim, cfg.hidden, cfg.activation,
                            cfg.actor_lr, init_rng);
    res.critic = CriticEnsemble::make(spec.state_dim, spec.action_dim, cfg.hidden,
                                      cfg.activation, cfg.critic_lr, init_rng);
    Actor& actor = res.actor;
    CriticEnsemble& critic = res.critic;

    ReplayBuffer replay(cfg.replay_capacity);
    if (cfg.expert_to_buffer && expert) {
        for (size_t i = 0; i < expert->size(); ++i) replay.push(expert->at(i));
    }

    double alpha = cfg.critic.alpha;
    double log_alpha = std::log(std::max(alpha, std::exp(kLogAlphaMin)));

    ActorConfig actor_cfg;
    actor_cfg.q_mode = cfg.q_mode;
    actor_cfg.entropy_mode = cfg.entropy_mode;
    actor_cfg.entropy = cfg.entropy;
    actor_cfg.gbc = cfg.gbc;

    // Accumulators for the metrics row covering the updates since last eval.
    double acc_actor_loss = 0, acc_entropy = 0, acc_c1 = 0, acc_c2 = 0, acc_cql = 0;
    long long acc_n = 0;

    std::deque<double> q_window;
    std::unique_ptr<Env> eval_env = make_env(spec.name);
    long long eval_count = 0;

    std::vector<Transition> episode;
    Vector state = cfg.total_steps > 0 ? env.reset(env_rng) : Vector();

    for (long long step = 1; step <= cfg.total_steps; ++step) {
        Vector action(spec.action_dim);
        if (step <= cfg.warmup_steps) {
            for (int i = 0; i < spec.action_dim; ++i) action[i] = action_rng.uniform(-1.0, 1.0);
        } else {
            const GaussianHead head = head_from_net(actor.net, state);
            action = sample(head, action_rng).action;
        }

        const StepResult sr = env.step(action);
        Transition t;
        t.state = state;
        t.action = action;
        t.reward = sr.reward;
        t.next_state = sr.state;
        t.done = sr.done;
        episode.push_back(std::move(t));

        if (sr.done) {
            ++res.train_episodes;
            if (sr.success) {
                ++res.train_successes;
                if (res.first_success_step < 0) res.first_success_step = step;
            }
            replay.finalize_episode(std::move(episode), cfg.critic.gamma);
            episode.clear();
            state = env.reset(env_rng);
        } else {
            state = sr.state;
        }

        if (step > cfg.warmup_steps && replay.size() >= static_cast<size_t>(cfg.batch_size)) {
            CriticConfig ccfg = cfg.critic;
            ccfg.alpha = alpha;
            actor_cfg.alpha = alpha;

            std::vector<Transition> drawn = replay.sample(cfg.batch_size, batch_rng);
            if (cfg.expert_to_critic && expert) {
                const int extra = std::max(1, cfg.batch_size / 4);
                auto exp_rows = expert->sample(extra, batch_rng);
                for (int i = 0; i < extra; ++i) {
                    drawn[drawn.size() - 1 - i] = std::move(exp_rows[i]);
                }
            }
            const TransitionBatch batch = to_batch(drawn);

            Matrix exp_states, exp_actions;
            const bool use_bc = expert != nullptr && cfg.gbc.lambda_bc > 0.0;
            if (use_bc) {
                const TransitionBatch eb = to_batch(expert->sample(cfg.batch_size, batch_rng));
                exp_states = eb.states;
                exp_actions = eb.actions;
            }

            try {
                const CriticUpdateResult cr = critic_update(critic, actor.net, batch, ccfg,
                                                            cfg.entropy_mode, cfg.entropy,
                                                            critic_rng);
                ++res.critic_updates;

                const ActorUpdateResult ar = policy_update(
                    actor, critic, batch.states, use_bc ? &exp_states : nullptr,
                    use_bc ? &exp_actions : nullptr, actor_cfg, actor_rng);
                ++res.actor_updates;

                critic.soft_update_targets(cfg.critic.tau);
                ++res.soft_updates;

                if (!all_finite({cr.loss_q1, cr.loss_q2, cr.mean_target, ar.loss, ar.entropy_term})) {
                    throw_error(ErrorKind::Numeric, "non-finite loss at step " + std::to_string(step));
                }

                if (cfg.alpha_mode == AlphaMode::Auto) {
                    log_alpha += cfg.alpha_lr * alpha * (cfg.target_entropy - ar.entropy_term);
                    log_alpha = std::clamp(log_alpha, kLogAlphaMin, kLogAlphaMax);
                    alpha = std::exp(log_alpha);
                }

                acc_actor_loss += ar.loss;
                acc_entropy += ar.entropy_term;
                acc_c1 += cr.loss_q1;
                acc_c2 += cr.loss_q2;
                acc_cql += 0.5 * (cr.cql_q1 + cr.cql_q2);
                ++acc_n;
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::Numeric) {
                    const std::string snap =
                        divergence_snapshot(step, e.what(), &batch, actor, critic, alpha);
                    if (sinks.divergence) sinks.divergence(snap);
                }
                throw;
            }
        }

        res.steps_run = step;

        if (step % cfg.eval_every == 0) {
            Rng eval_rng(derive_seed(derive_seed(cfg.seed, kStreamEval), ++eval_count));
            EvalReport er = evaluate(actor.net, *eval_env, cfg.eval_episodes, eval_rng, &critic);
            er.step = step;

            q_window.push_back(er.mean_q);
            while (q_window.size() > 10) q_window.pop_front();
            double mean = 0;
            for (double q : q_window) mean += q;
            mean /= static_cast<double>(q_window.size());
            double var = 0;
            for (double q : q_window) var += (q - mean) * (q - mean);
            er.q_std_window = std::sqrt(var / static_cast<double>(q_window.size()));

            er.ood_ratio = expert ? ood_ratio(actor.net, *expert, cfg.ood_threshold,
                                              cfg.gbc.gate_mode)
                                  : 0.0;

            MetricsRow row;
            row.step = step;
            row.success_rate = er.success_rate;
            row.mean_episode_steps = er.mean_episode_steps;
            row.mean_q = er.mean_q;
            row.q_std_window = er.q_std_window;
            row.ood_ratio = er.ood_ratio;
            row.alpha = alpha;
            row.mean_entropy = acc_n > 0 ? acc_entropy / acc_n : 0.0;
            row.actor_loss = acc_n > 0 ? acc_actor_loss / acc_n : 0.0;
            row.critic_loss_1 = acc_n > 0 ? acc_c1 / acc_n : 0.0;
            row.critic_loss_2 = acc_n > 0 ? acc_c2 / acc_n : 0.0;
            row.cql_term_mean = acc_n > 0 ? acc_cql / acc_n : 0.0;
            acc_actor_loss = acc_entropy = acc_c1 = acc_c2 = acc_cql = 0.0;
            acc_n = 0;

            res.rows.push_back(row);
            if (sinks.metrics) sinks.metrics->write(row);
            if (sinks.checkpoint) sinks.checkpoint(step, actor.net);

            if (cfg.early_stop_success >= 0.0 && er.success_rate >= cfg.early_stop_success) {
                res.stopped_early = true;
                break;
            }
        }
    }

    res.final_alpha = alpha;
    return res;
}

}  // namespace sigent
