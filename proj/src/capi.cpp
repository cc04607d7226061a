#include "sigent/sigent.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "config.hpp"
#include "diagnostics.hpp"
#include "envs.hpp"
#include "errors.hpp"
#include "runner.hpp"
#include "trainer.hpp"

using namespace sigent;

namespace {

thread_local std::string g_last_error = "no error";

sigent_status status_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return SIGENT_ERR_CONFIG;
        case ErrorKind::Numeric: return SIGENT_ERR_NUMERIC;
        case ErrorKind::Io: return SIGENT_ERR_IO;
        case ErrorKind::Validation: return SIGENT_ERR_VALIDATION;
        case ErrorKind::Parse: return SIGENT_ERR_PARSE;
        case ErrorKind::Format: return SIGENT_ERR_FORMAT;
        case ErrorKind::Structural: return SIGENT_ERR_STRUCTURAL;
    }
    return SIGENT_ERR_UNKNOWN;
}

template <typename F>
sigent_status wrap(F&& f) noexcept {
    try {
        f();
        return SIGENT_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SIGENT_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown failure";
        return SIGENT_ERR_UNKNOWN;
    }
}

void check_ptr(const void* p, const char* what) {
    require(p != nullptr, ErrorKind::Validation, std::string(what) + " must not be NULL");
}

void copy_out(const std::string& s, char* buf, size_t cap, const char* what) {
    check_ptr(buf, what);
    require(s.size() + 1 <= cap, ErrorKind::Validation,
            std::string(what) + " buffer too small (need " + std::to_string(s.size() + 1) +
                " bytes)");
    std::memcpy(buf, s.c_str(), s.size() + 1);
}

RunSetup setup_from_config(const char* config_path, const char* const* overrides,
                           size_t n_overrides, std::vector<std::string>* recorded) {
    check_ptr(config_path, "config_path");
    ConfigMap cfg = load_config_file(config_path);
    for (size_t i = 0; i < n_overrides; ++i) {
        check_ptr(overrides[i], "override");
        apply_override(cfg, overrides[i]);
        if (recorded) recorded->push_back(overrides[i]);
    }
    RunSetup setup = resolve_config(cfg);
    if (const char* root = std::getenv("SIGENT_RUNS_DIR"); root && *root) {
        setup.run_root = root;
    }
    return setup;
}

}  // namespace

struct sigent_env {
    std::unique_ptr<Env> env;
    Rng rng;
    bool episode_active = false;

    sigent_env(std::unique_ptr<Env> e, uint64_t seed) : env(std::move(e)), rng(seed) {}
};

struct sigent_policy {
    Mlp net;
};

extern "C" {

const char* sigent_last_error(void) { return g_last_error.c_str(); }

sigent_status sigent_env_create(const char* name, uint64_t seed, sigent_env** out) {
    return wrap([&] {
        check_ptr(name, "name");
        check_ptr(out, "out");
        *out = new sigent_env(make_env(name), seed);
    });
}

void sigent_env_destroy(sigent_env* env) { delete env; }

sigent_status sigent_env_dims(const sigent_env* env, int* state_dim, int* action_dim,
                              int* max_episode_steps) {
    return wrap([&] {
        check_ptr(env, "env");
        const EnvSpec& s = env->env->spec();
        if (state_dim) *state_dim = s.state_dim;
        if (action_dim) *action_dim = s.action_dim;
        if (max_episode_steps) *max_episode_steps = s.max_episode_steps;
    });
}

sigent_status sigent_env_reset(sigent_env* env, double* state_out) {
    return wrap([&] {
        check_ptr(env, "env");
        check_ptr(state_out, "state_out");
        const Vector s = env->env->reset(env->rng);
        for (int i = 0; i < s.size(); ++i) state_out[i] = s[i];
        env->episode_active = true;
    });
}

sigent_status sigent_env_step(sigent_env* env, const double* action, double* state_out,
                              double* reward_out, int* done_out, int* success_out) {
    return wrap([&] {
        check_ptr(env, "env");
        check_ptr(action, "action");
        const EnvSpec& spec = env->env->spec();
        Vector a(spec.action_dim);
        for (int i = 0; i < spec.action_dim; ++i) a[i] = action[i];
        const StepResult r = env->env->step(a);
        if (state_out) {
            for (int i = 0; i < r.state.size(); ++i) state_out[i] = r.state[i];
        }
        if (reward_out) *reward_out = r.reward;
        if (done_out) *done_out = r.done ? 1 : 0;
        if (success_out) *success_out = r.success ? 1 : 0;
        if (r.done) env->episode_active = false;
    });
}

sigent_status sigent_policy_load(const char* path, sigent_policy** out) {
    return wrap([&] {
        check_ptr(path, "path");
        check_ptr(out, "out");
        Mlp net = load_mlp(path);
        require(net.output_dim() % 2 == 0, ErrorKind::Format,
                "checkpoint is not a policy network (odd output width)");
        *out = new sigent_policy{std::move(net)};
    });
}

void sigent_policy_destroy(sigent_policy* policy) { delete policy; }

sigent_status sigent_policy_dims(const sigent_policy* policy, int* state_dim, int* action_dim) {
    return wrap([&] {
        check_ptr(policy, "policy");
        if (state_dim) *state_dim = policy->net.input_dim();
        if (action_dim) *action_dim = policy->net.output_dim() / 2;
    });
}

sigent_status sigent_policy_mean_action(const sigent_policy* policy, const double* state,
                                        double* action_out) {
    return wrap([&] {
        check_ptr(policy, "policy");
        check_ptr(state, "state");
        check_ptr(action_out, "action_out");
        Vector s(policy->net.input_dim());
        for (int i = 0; i < s.size(); ++i) s[i] = state[i];
        const Vector a = mean_action(head_from_net(policy->net, s));
        for (int i = 0; i < a.size(); ++i) action_out[i] = a[i];
    });
}

sigent_status sigent_record_demo(const char* env_name, const char* out_path, uint64_t seed,
                                 double gamma, int* episode_len_out) {
    return wrap([&] {
        check_ptr(env_name, "env_name");
        check_ptr(out_path, "out_path");
        auto env = make_env(env_name);
        auto expert = make_expert(env_name);
        Rng rng(seed);
        const std::vector<Transition> episode = record_demo(*env, *expert, rng);
        save_demo(episode, gamma, out_path);
        if (episode_len_out) *episode_len_out = static_cast<int>(episode.size());
    });
}

sigent_status sigent_train_run(const char* config_path, const char* const* overrides,
                               size_t n_overrides, char* run_dir_out, size_t run_dir_cap) {
    return wrap([&] {
        if (n_overrides > 0) check_ptr(overrides, "overrides");
        std::vector<std::string> recorded;
        const RunSetup setup = setup_from_config(config_path, overrides, n_overrides, &recorded);
        const RunOutcome outcome = run_training(setup, recorded);
        if (run_dir_out) copy_out(outcome.run_dir, run_dir_out, run_dir_cap, "run_dir_out");
    });
}

sigent_status sigent_sweep_run(const char* config_path, const char* sweep_path,
                               const char* const* overrides, size_t n_overrides, int jobs,
                               char* out_dirs, size_t out_cap) {
    return wrap([&] {
        check_ptr(sweep_path, "sweep_path");
        if (n_overrides > 0) check_ptr(overrides, "overrides");
        std::vector<std::string> recorded;
        const RunSetup setup = setup_from_config(config_path, overrides, n_overrides, &recorded);
        const std::vector<RunOutcome> outcomes = run_sweep(setup, sweep_path, recorded, jobs);
        if (out_dirs) {
            std::string joined;
            for (const auto& o : outcomes) {
                joined += o.run_dir;
                joined += '\n';
            }
            copy_out(joined, out_dirs, out_cap, "out_dirs");
        }
    });
}

sigent_status sigent_evaluate(const char* checkpoint_path, const char* env_name, int episodes,
                              uint64_t seed, const char* report_path, double* success_rate_out,
                              double* mean_episode_steps_out) {
    return wrap([&] {
        check_ptr(checkpoint_path, "checkpoint_path");
        check_ptr(env_name, "env_name");
        require(episodes >= 1, ErrorKind::Validation, "episodes must be at least 1");
        const Mlp net = load_mlp(checkpoint_path);
        require(net.output_dim() % 2 == 0, ErrorKind::Format,
                "checkpoint is not a policy network (odd output width)");
        auto env = make_env(env_name);
        require(net.input_dim() == env->spec().state_dim &&
                    net.output_dim() == 2 * env->spec().action_dim,
                ErrorKind::Validation, "checkpoint dimensions do not match env '" +
                                           std::string(env_name) + "'");
        Rng rng(seed);
        const EvalReport r = evaluate(net, *env, episodes, rng);
        if (report_path) {
            std::ofstream out(report_path);
            require(out.good(), ErrorKind::Io,
                    "cannot open '" + std::string(report_path) + "' for writing");
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.success_rate, r.mean_episode_steps);
            out << "success_rate,mean_episode_steps\n" << buf << "\n";
            require(out.good(), ErrorKind::Io,
                    "write to '" + std::string(report_path) + "' failed");
        }
        if (success_rate_out) *success_rate_out = r.success_rate;
        if (mean_episode_steps_out) *mean_episode_steps_out = r.mean_episode_steps;
    });
}

sigent_status sigent_diagnose_ood(const char* checkpoint_path, const char* demo_path,
                                  double threshold, const char* gate_mode, double* ratio_out) {
    return wrap([&] {
        check_ptr(checkpoint_path, "checkpoint_path");
        check_ptr(demo_path, "demo_path");
        check_ptr(gate_mode, "gate_mode");
        check_ptr(ratio_out, "ratio_out");
        GateMode mode;
        if (std::string(gate_mode) == "l2") mode = GateMode::L2Norm;
        else if (std::string(gate_mode) == "per-dim-mse") mode = GateMode::PerDimMse;
        else throw_error(ErrorKind::Config,
                         "gate_mode must be l2 or per-dim-mse, got '" + std::string(gate_mode) + "'");
        const Mlp net = load_mlp(checkpoint_path);
        const ExpertBuffer expert = load_demo(demo_path);
        require(net.input_dim() == expert.at(0).state.size() &&
                    net.output_dim() == 2 * expert.at(0).action.size(),
                ErrorKind::Validation, "checkpoint dimensions do not match the demo");
        *ratio_out = ood_ratio(net, expert, threshold, mode);
    });
}

sigent_status sigent_diagnose_landscape(const char* out_path, double q_const, double sigma_pi,
                                        double alpha, double h_max, double m, double t,
                                        int grid_size, double reference_action,
                                        double band_multiplier) {
    return wrap([&] {
        check_ptr(out_path, "out_path");
        EntropyConfig cfg{h_max, m, t};
        const LandscapeGrid grid =
            entropy_landscape(sigma_pi, cfg, alpha, [&](double) { return q_const; }, grid_size,
                              reference_action, band_multiplier);
        write_landscape_csv(grid, out_path);
    });
}

sigent_status sigent_diagnose_landscape_q(const char* out_path, const char* q1_path,
                                          const char* q2_path, const double* state, int state_dim,
                                          const double* fixed_action, int action_dim,
                                          int slice_dim, double sigma_pi, double alpha,
                                          double h_max, double m, double t, int grid_size,
                                          double reference_action, double band_multiplier) {
    return wrap([&] {
        check_ptr(out_path, "out_path");
        check_ptr(q1_path, "q1_path");
        check_ptr(state, "state");
        check_ptr(fixed_action, "fixed_action");
        require(state_dim > 0 && action_dim > 0, ErrorKind::Validation, "dims must be positive");
        require(slice_dim >= 0 && slice_dim < action_dim, ErrorKind::Validation,
                "slice_dim out of range");

        const Mlp q1 = load_mlp(q1_path);
        require(q1.input_dim() == state_dim + action_dim && q1.output_dim() == 1,
                ErrorKind::Validation, "q1 checkpoint dimensions do not match state/action dims");
        Mlp q2;
        const bool twin = q2_path != nullptr;
        if (twin) {
            q2 = load_mlp(q2_path);
            require(q2.input_dim() == q1.input_dim() && q2.output_dim() == 1,
                    ErrorKind::Validation, "q2 checkpoint dimensions do not match q1");
        }

        Vector in(state_dim + action_dim);
        for (int i = 0; i < state_dim; ++i) in[i] = state[i];
        for (int i = 0; i < action_dim; ++i) in[state_dim + i] = fixed_action[i];

        auto q_fn = [&](double a) {
            in[state_dim + slice_dim] = a;
            const double v1 = q1.forward(in)[0];
            if (!twin) return v1;
            return std::min(v1, q2.forward(in)[0]);
        };
        EntropyConfig cfg{h_max, m, t};
        const LandscapeGrid grid = entropy_landscape(sigma_pi, cfg, alpha, q_fn, grid_size,
                                                     reference_action, band_multiplier);
        write_landscape_csv(grid, out_path);
    });
}

}  // extern "C"
