// Command-line front end. Everything goes through the C API in
// sigent/sigent.h; this translation unit deliberately has no access to the
// library's internal headers.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sigent/sigent.h"

namespace {

// Exit contract: 0 success, 2 configuration/input error, 3 divergence abort,
// 4 I/O failure, 1 anything else.
int exit_code_for(sigent_status s) {
    switch (s) {
        case SIGENT_OK: return 0;
        case SIGENT_ERR_CONFIG:
        case SIGENT_ERR_VALIDATION:
        case SIGENT_ERR_PARSE:
        case SIGENT_ERR_FORMAT:
        case SIGENT_ERR_STRUCTURAL: return 2;
        case SIGENT_ERR_NUMERIC: return 3;
        case SIGENT_ERR_IO: return 4;
        case SIGENT_ERR_UNKNOWN: return 1;
    }
    return 1;
}

int finish(sigent_status s) {
    if (s != SIGENT_OK) {
        std::fprintf(stderr, "error: %s\n", sigent_last_error());
    }
    return exit_code_for(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sigent: entropy-bounded actor-critic with gated cloning"};
    app.require_subcommand(1);

    // record-demo
    auto* rec = app.add_subcommand("record-demo", "Roll the scripted expert and save a demo file");
    std::string rec_env, rec_out;
    uint64_t rec_seed = 0;
    double rec_gamma = 0.99;
    rec->add_option("--env", rec_env, "environment name")->required();
    rec->add_option("--out", rec_out, "output demo path")->required();
    rec->add_option("--seed", rec_seed, "episode spawn seed");
    rec->add_option("--gamma", rec_gamma, "discount recorded in the demo header");

    // train
    auto* tr = app.add_subcommand("train", "Run training from a config file");
    std::string tr_config, tr_sweep;
    std::vector<std::string> tr_sets;
    int tr_jobs = 1;
    tr->add_option("--config", tr_config, "key=value config file")->required();
    tr->add_option("--set", tr_sets, "override, key=value (repeatable)");
    tr->add_option("--sweep", tr_sweep, "sweep file: one cell of key=value pairs per line");
    tr->add_option("--jobs", tr_jobs, "parallel runs in sweep mode");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a policy checkpoint with mean actions");
    std::string ev_ckpt, ev_env, ev_report;
    int ev_episodes = 10;
    uint64_t ev_seed = 0;
    ev->add_option("--checkpoint", ev_ckpt, "policy checkpoint (.sgnt)")->required();
    ev->add_option("--env", ev_env, "environment name")->required();
    ev->add_option("--episodes", ev_episodes, "evaluation episodes");
    ev->add_option("--seed", ev_seed, "evaluation spawn seed");
    ev->add_option("--report", ev_report, "optional CSV report path");

    // diagnose
    auto* dg = app.add_subcommand("diagnose", "Deviation-ratio and value-landscape exports");
    auto* ood = dg->add_subcommand("ood", "Fraction of demo states where the policy deviates");
    std::string ood_ckpt, ood_demo, ood_gate = "per-dim-mse";
    double ood_threshold = 0.3;
    ood->add_option("--checkpoint", ood_ckpt, "policy checkpoint")->required();
    ood->add_option("--demo", ood_demo, "demo file")->required();
    ood->add_option("--threshold", ood_threshold, "deviation threshold");
    ood->add_option("--gate-mode", ood_gate, "l2 or per-dim-mse");

    auto* land = dg->add_subcommand("landscape", "1D regularized value-landscape slice");
    std::string land_out, land_q1, land_q2;
    std::vector<double> land_state, land_fixed;
    int land_slice = 0, land_grid = 201;
    double land_qconst = 0.0, land_sigma = 0.1, land_alpha = 0.2;
    double land_hmax = 1.0, land_m = 0.0, land_t = 1.0, land_ref = 0.0, land_band = 1.5;
    land->add_option("--out", land_out, "output CSV path")->required();
    land->add_option("--q-const", land_qconst, "analytic mode: constant q value");
    land->add_option("--q1", land_q1, "checkpoint mode: first critic (.sgnt)");
    land->add_option("--q2", land_q2, "checkpoint mode: second critic (twin minimum)");
    land->add_option("--state", land_state, "checkpoint mode: state components");
    land->add_option("--fixed-action", land_fixed, "checkpoint mode: off-slice action components");
    land->add_option("--slice-dim", land_slice, "checkpoint mode: action dimension to sweep");
    land->add_option("--sigma-pi", land_sigma, "policy standard deviation");
    land->add_option("--alpha", land_alpha, "entropy weight");
    land->add_option("--h-max", land_hmax, "entropy cap per dimension");
    land->add_option("--m", land_m, "entropy sigmoid center");
    land->add_option("--t", land_t, "entropy sigmoid temperature");
    land->add_option("--grid", land_grid, "grid points");
    land->add_option("--reference", land_ref, "policy mean action");
    land->add_option("--band", land_band, "sampling band width in sigmas");
    dg->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    if (rec->parsed()) {
        int len = 0;
        const sigent_status s =
            sigent_record_demo(rec_env.c_str(), rec_out.c_str(), rec_seed, rec_gamma, &len);
        if (s == SIGENT_OK) {
            std::printf("recorded %d transitions to %s\n", len, rec_out.c_str());
        }
        return finish(s);
    }

    if (tr->parsed()) {
        std::vector<const char*> overrides;
        for (const auto& o : tr_sets) overrides.push_back(o.c_str());
        if (!tr_sweep.empty()) {
            std::vector<char> dirs(1 << 16);
            const sigent_status s =
                sigent_sweep_run(tr_config.c_str(), tr_sweep.c_str(), overrides.data(),
                                 overrides.size(), tr_jobs, dirs.data(), dirs.size());
            if (s == SIGENT_OK) std::printf("%s", dirs.data());
            return finish(s);
        }
        std::vector<char> dir(1 << 12);
        const sigent_status s = sigent_train_run(tr_config.c_str(), overrides.data(),
                                                 overrides.size(), dir.data(), dir.size());
        if (s == SIGENT_OK) std::printf("%s\n", dir.data());
        return finish(s);
    }

    if (ev->parsed()) {
        double success = 0.0, steps = 0.0;
        const sigent_status s = sigent_evaluate(
            ev_ckpt.c_str(), ev_env.c_str(), ev_episodes, ev_seed,
            ev_report.empty() ? nullptr : ev_report.c_str(), &success, &steps);
        if (s == SIGENT_OK) {
            std::printf("success_rate %.6g\nmean_episode_steps %.6g\n", success, steps);
        }
        return finish(s);
    }

    if (ood->parsed()) {
        double ratio = 0.0;
        const sigent_status s = sigent_diagnose_ood(ood_ckpt.c_str(), ood_demo.c_str(),
                                                    ood_threshold, ood_gate.c_str(), &ratio);
        if (s == SIGENT_OK) std::printf("ood_ratio %.6g\n", ratio);
        return finish(s);
    }

    if (land->parsed()) {
        sigent_status s;
        if (!land_q1.empty()) {
            s = sigent_diagnose_landscape_q(
                land_out.c_str(), land_q1.c_str(), land_q2.empty() ? nullptr : land_q2.c_str(),
                land_state.data(), static_cast<int>(land_state.size()), land_fixed.data(),
                static_cast<int>(land_fixed.size()), land_slice, land_sigma, land_alpha,
                land_hmax, land_m, land_t, land_grid, land_ref, land_band);
        } else {
            s = sigent_diagnose_landscape(land_out.c_str(), land_qconst, land_sigma, land_alpha,
                                          land_hmax, land_m, land_t, land_grid, land_ref,
                                          land_band);
        }
        if (s == SIGENT_OK) std::printf("wrote %s\n", land_out.c_str());
        return finish(s);
    }

    return 1;
}
