#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "actor.hpp"
#include "critic.hpp"
#include "diagnostics.hpp"
#include "envs.hpp"
#include "replay.hpp"

namespace sigent {

enum class Arm { SigentSac, SacWithPrior };
enum class AlphaMode { Fixed, Auto };

struct TrainConfig {
    std::string env_name = "point-reach";
    long long total_steps = 50000;
    int batch_size = 64;
    long long warmup_steps = 1000;  // random actions, no updates
    long long eval_every = 5000;
    int eval_episodes = 20;
    uint64_t seed = 0;

    EntropyMode entropy_mode = EntropyMode::Sigmoid;
    AlphaMode alpha_mode = AlphaMode::Fixed;
    double target_entropy = 1.0;  // H0 for alpha auto mode
    Arm arm = Arm::SigentSac;

    EntropyConfig entropy;
    CriticConfig critic;  // critic.alpha doubles as the live entropy weight
    GbcConfig gbc;
    QMode q_mode = QMode::MinQ;

    std::vector<int> hidden = {64, 64};
    Activation activation = Activation::Relu;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    size_t replay_capacity = 1000000;

    bool expert_to_buffer = false;  // mirror the demo into the replay buffer
    bool expert_to_critic = false;  // mix expert rows into critic batches
    double ood_threshold = 0.3;     // eval-time deviation threshold
    double early_stop_success = -1.0;  // stop once an eval reaches this; <0 disables

    void validate() const;
};

// A config field change forced by the algorithm arm.
struct ArmOverride {
    std::string key;
    std::string from;
    std::string to;
};

// The sac-with-prior baseline is standard SAC seeded with the expert data:
// negative entropy, no imitation penalty, no conservative term, demo mirrored
// into the replay buffer. Returns the fields that actually changed.
std::vector<ArmOverride> normalize_for_arm(TrainConfig& cfg);

struct EvalReport {
    long long step = 0;
    double success_rate = 0.0;
    double mean_episode_steps = 0.0;
    double mean_q = 0.0;        // mean min-Q along eval trajectories (0 without critic)
    double q_std_window = 0.0;  // filled by the trainer
    double ood_ratio = 0.0;     // filled by the trainer
};

// Deterministic mean-action rollouts; never touches training state.
EvalReport evaluate(const Mlp& policy_net, Env& env, int episodes, Rng& rng,
                    const CriticEnsemble* critic = nullptr);

// Rolls the scripted expert until it produces a successful episode.
std::vector<Transition> record_demo(Env& env, ScriptedExpert& expert, Rng& rng,
                                    int max_attempts = 10);

struct RunSinks {
    MetricsSink* metrics = nullptr;
    std::function<void(long long step, const Mlp& policy)> checkpoint;
    std::function<void(const std::string& json)> divergence;  // snapshot on abort
};

struct TrainResult {
    std::vector<MetricsRow> rows;
    long long steps_run = 0;
    long long critic_updates = 0;
    long long actor_updates = 0;
    long long soft_updates = 0;
    long long train_episodes = 0;       // episodes finished during collection
    long long train_successes = 0;      // of those, how many succeeded
    long long first_success_step = -1;  // -1: the agent never succeeded
    bool stopped_early = false;
    double final_alpha = 0.0;
    Actor actor;
    CriticEnsemble critic;
};

// Runs the full training loop: warmup with random actions, then one critic
// update, one actor update, and one target soft update per environment step
// whenever the replay buffer holds at least one batch. Evaluates every
// eval_every steps. Aborts with a diagnostic snapshot when a loss or gradient
// goes non-finite. expert may be null (pure actor-critic).
TrainResult train(const TrainConfig& cfg, Env& env, const ExpertBuffer* expert,
                  const RunSinks& sinks);

}  // namespace sigent
