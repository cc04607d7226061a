#pragma once

#include <functional>
#include <string>
#include <vector>

#include "actor.hpp"
#include "policy.hpp"
#include "replay.hpp"

namespace sigent {

// Fraction of expert states whose policy mean action deviates from the
// recorded expert action beyond the threshold under the given gate mode.
double ood_ratio(const Mlp& policy_net, const ExpertBuffer& expert, double threshold,
                 GateMode gate_mode);

// One-dimensional slice through the regularized value landscape around a
// Gaussian policy centered at a reference action.
struct LandscapeGrid {
    Vector action_grid;           // squashed actions in [-1+delta, 1-delta]
    Vector q_values;              // raw q_fn
    Vector neg_entropy_adjusted;  // q + alpha * (-log pi), inside the sampling band
    Vector sig_entropy_adjusted;  // q + alpha * H_sig, inside the sampling band
};

// Evaluates q_fn plus both entropy adjustments over a grid of actions. The
// adjustments model what the actor objective sees for actions the policy can
// actually sample, so they apply only where the pre-squash action lies within
// band_multiplier * sigma_pi of the mean; outside that band both adjusted
// curves equal q_values.
LandscapeGrid entropy_landscape(double sigma_pi, const EntropyConfig& cfg, double alpha,
                                const std::function<double(double)>& q_fn, int grid_size,
                                double reference_action = 0.0, double band_multiplier = 1.5);

void write_landscape_csv(const LandscapeGrid& grid, const std::string& path);

// Same construction over a 2D action grid; rows are (a0, a1, q, neg, sig)
// with the band applied per dimension.
void write_landscape_2d_csv(double sigma_pi, const EntropyConfig& cfg, double alpha,
                            const std::function<double(double, double)>& q_fn, int grid_size,
                            const Vector& reference_action, double band_multiplier,
                            const std::string& path);

// One metrics row per evaluation.
struct MetricsRow {
    long long step = 0;
    double success_rate = 0.0;
    double mean_episode_steps = 0.0;
    double mean_q = 0.0;
    double q_std_window = 0.0;  // std of mean_q over the trailing eval window
    double ood_ratio = 0.0;
    double alpha = 0.0;
    double mean_entropy = 0.0;
    double actor_loss = 0.0;
    double critic_loss_1 = 0.0;
    double critic_loss_2 = 0.0;
    double cql_term_mean = 0.0;
};

// Append-only comma-separated sink with a fixed column set; one writer per
// run. Values are written with full double precision so files round trip.
class MetricsSink {
public:
    explicit MetricsSink(const std::string& path);
    void write(const MetricsRow& row);
    const std::string& path() const { return path_; }

    static const char* header();
    static std::vector<MetricsRow> read(const std::string& path);

private:
    std::string path_;
};

}  // namespace sigent
