/* C interface to the sigent library: environments, policy checkpoints, and
 * the training/evaluation/diagnostic commands. All functions return a status
 * code; on failure, sigent_last_error() describes the problem for the calling
 * thread. Pointers returned through out-params are owned by the caller and
 * released with the matching _destroy function. */
#ifndef SIGENT_H
#define SIGENT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sigent_status {
    SIGENT_OK = 0,
    SIGENT_ERR_UNKNOWN = 1,
    SIGENT_ERR_CONFIG = 2,     /* bad configuration value or key */
    SIGENT_ERR_NUMERIC = 3,    /* divergence / non-finite arithmetic */
    SIGENT_ERR_IO = 4,         /* file system failure */
    SIGENT_ERR_VALIDATION = 5, /* invalid runtime input */
    SIGENT_ERR_PARSE = 6,      /* malformed text input */
    SIGENT_ERR_FORMAT = 7,     /* bad binary checkpoint */
    SIGENT_ERR_STRUCTURAL = 8  /* API contract violation */
} sigent_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* sigent_last_error(void);

/* ---- environments ---- */

typedef struct sigent_env sigent_env;

/* Known names: "point-reach", "point-push". The seed drives episode spawns. */
sigent_status sigent_env_create(const char* name, uint64_t seed, sigent_env** out);
void sigent_env_destroy(sigent_env* env);
sigent_status sigent_env_dims(const sigent_env* env, int* state_dim, int* action_dim,
                              int* max_episode_steps);
/* state_out must hold state_dim doubles. */
sigent_status sigent_env_reset(sigent_env* env, double* state_out);
/* action holds action_dim doubles in [-1, 1]; state_out as above. */
sigent_status sigent_env_step(sigent_env* env, const double* action, double* state_out,
                              double* reward_out, int* done_out, int* success_out);

/* ---- policy checkpoints ---- */

typedef struct sigent_policy sigent_policy;

sigent_status sigent_policy_load(const char* path, sigent_policy** out);
void sigent_policy_destroy(sigent_policy* policy);
sigent_status sigent_policy_dims(const sigent_policy* policy, int* state_dim, int* action_dim);
/* Deterministic evaluation action; action_out holds action_dim doubles. */
sigent_status sigent_policy_mean_action(const sigent_policy* policy, const double* state,
                                        double* action_out);

/* ---- commands ---- */

/* Rolls the env's scripted expert to one successful episode and saves it in
 * the demo text format; gamma is recorded for return-to-go computation. */
sigent_status sigent_record_demo(const char* env_name, const char* out_path, uint64_t seed,
                                 double gamma, int* episode_len_out);

/* Runs one training run from a config file plus key=value overrides. The
 * SIGENT_RUNS_DIR environment variable, when set, overrides run.root. The run
 * directory path is copied into run_dir_out (run_dir_cap bytes). */
sigent_status sigent_train_run(const char* config_path, const char* const* overrides,
                               size_t n_overrides, char* run_dir_out, size_t run_dir_cap);

/* Runs one training run per sweep-file line (space-separated key=value cells
 * on top of the config). Newline-separated run directories are copied into
 * out_dirs. jobs >= 1 selects parallel workers. */
sigent_status sigent_sweep_run(const char* config_path, const char* sweep_path,
                               const char* const* overrides, size_t n_overrides, int jobs,
                               char* out_dirs, size_t out_cap);

/* Mean-action rollouts of a policy checkpoint. report_path may be NULL; when
 * given, a one-row CSV report is written. */
sigent_status sigent_evaluate(const char* checkpoint_path, const char* env_name, int episodes,
                              uint64_t seed, const char* report_path, double* success_rate_out,
                              double* mean_episode_steps_out);

/* Fraction of demo states whose policy mean action deviates beyond threshold
 * under gate_mode ("l2" or "per-dim-mse"). */
sigent_status sigent_diagnose_ood(const char* checkpoint_path, const char* demo_path,
                                  double threshold, const char* gate_mode, double* ratio_out);

/* 1D value-landscape slice with a constant q function, written as CSV. */
sigent_status sigent_diagnose_landscape(const char* out_path, double q_const, double sigma_pi,
                                        double alpha, double h_max, double m, double t,
                                        int grid_size, double reference_action,
                                        double band_multiplier);

/* Same slice with q taken from critic checkpoints: the action's slice_dim
 * component runs over the grid, the others stay at fixed_action; q2_path may
 * be NULL to use q1 alone instead of the twin minimum. */
sigent_status sigent_diagnose_landscape_q(const char* out_path, const char* q1_path,
                                          const char* q2_path, const double* state, int state_dim,
                                          const double* fixed_action, int action_dim,
                                          int slice_dim, double sigma_pi, double alpha,
                                          double h_max, double m, double t, int grid_size,
                                          double reference_action, double band_multiplier);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SIGENT_H */
