#include "diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace sigent {

double ood_ratio(const Mlp& policy_net, const ExpertBuffer& expert, double threshold,
                 GateMode gate_mode) {
    require(expert.size() > 0, ErrorKind::Validation, "ood_ratio: empty expert buffer");
    require(threshold >= 0.0, ErrorKind::Config, "ood_ratio: negative threshold");

    const int n = static_cast<int>(expert.size());
    Matrix states(n, expert.at(0).state.size());
    Matrix actions(n, expert.at(0).action.size());
    for (int i = 0; i < n; ++i) {
        states.row(i) = expert.at(i).state.transpose();
        actions.row(i) = expert.at(i).action.transpose();
    }
    const Matrix means = mean_actions(heads_from_net(policy_net, states));

    GbcConfig cfg;
    cfg.gate_mode = gate_mode;
    cfg.epsilon = threshold;
    cfg.epsilon_bc = threshold;
    return gates(means, actions, cfg).mean();
}

namespace {

constexpr double kGridDelta = 1e-3;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Per-dimension log-density of the squashed Gaussian at action a, with the
// squash correction expressed through a itself: log(1 - tanh(x)^2) = log(1 - a^2).
double squashed_log_density(double a, double mu_pre, double sigma) {
    const double x = std::atanh(a);
    const double z = (x - mu_pre) / sigma;
    return -0.5 * z * z - std::log(sigma) - kHalfLog2Pi - std::log1p(-a * a);
}

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

LandscapeGrid entropy_landscape(double sigma_pi, const EntropyConfig& cfg, double alpha,
                                const std::function<double(double)>& q_fn, int grid_size,
                                double reference_action, double band_multiplier) {
    require(sigma_pi > 0.0, ErrorKind::Config, "entropy_landscape: sigma_pi must be positive");
    require(grid_size >= 3, ErrorKind::Config, "entropy_landscape: grid_size must be at least 3");
    require(band_multiplier > 0.0, ErrorKind::Config,
            "entropy_landscape: band_multiplier must be positive");
    require(std::abs(reference_action) < 1.0, ErrorKind::Config,
            "entropy_landscape: reference action must lie inside (-1, 1)");

    const double mu_pre = std::atanh(reference_action);
    const double band = band_multiplier * sigma_pi;

    LandscapeGrid g;
    g.action_grid.resize(grid_size);
    g.q_values.resize(grid_size);
    g.neg_entropy_adjusted.resize(grid_size);
    g.sig_entropy_adjusted.resize(grid_size);

    const double lo = -1.0 + kGridDelta;
    const double hi = 1.0 - kGridDelta;
    for (int i = 0; i < grid_size; ++i) {
        const double a = lo + (hi - lo) * i / (grid_size - 1);
        const double q = q_fn(a);
        require(std::isfinite(q), ErrorKind::Numeric, "entropy_landscape: q_fn returned non-finite");
        g.action_grid[i] = a;
        g.q_values[i] = q;

        const double x = std::atanh(a);
        if (std::abs(x - mu_pre) <= band) {
            const double lp = squashed_log_density(a, mu_pre, sigma_pi);
            const double surprisal = -lp;
            g.neg_entropy_adjusted[i] = q + alpha * surprisal;
            g.sig_entropy_adjusted[i] = q + alpha * cfg.h_max * stable_sigmoid((surprisal - cfg.m) / cfg.t);
        } else {
            g.neg_entropy_adjusted[i] = q;
            g.sig_entropy_adjusted[i] = q;
        }
    }
    return g;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_landscape_csv(const LandscapeGrid& grid, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << "action,q,neg_adjusted,sig_adjusted\n";
    for (int i = 0; i < grid.action_grid.size(); ++i) {
        out << fmt(grid.action_grid[i]) << ',' << fmt(grid.q_values[i]) << ','
            << fmt(grid.neg_entropy_adjusted[i]) << ',' << fmt(grid.sig_entropy_adjusted[i]) << "\n";
    }
    require(out.good(), ErrorKind::Io, "write to '" + path + "' failed");
}

void write_landscape_2d_csv(double sigma_pi, const EntropyConfig& cfg, double alpha,
                            const std::function<double(double, double)>& q_fn, int grid_size,
                            const Vector& reference_action, double band_multiplier,
                            const std::string& path) {
    require(sigma_pi > 0.0, ErrorKind::Config, "landscape_2d: sigma_pi must be positive");
    require(grid_size >= 3, ErrorKind::Config, "landscape_2d: grid_size must be at least 3");
    require(reference_action.size() == 2, ErrorKind::Config, "landscape_2d: reference must be 2D");

    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << "action_0,action_1,q,neg_adjusted,sig_adjusted\n";

    const double lo = -1.0 + kGridDelta;
    const double hi = 1.0 - kGridDelta;
    const double band = band_multiplier * sigma_pi;
    Vector mu_pre(2);
    for (int k = 0; k < 2; ++k) {
        require(std::abs(reference_action[k]) < 1.0, ErrorKind::Config,
                "landscape_2d: reference action must lie inside (-1, 1)");
        mu_pre[k] = std::atanh(reference_action[k]);
    }

    for (int i = 0; i < grid_size; ++i) {
        const double a0 = lo + (hi - lo) * i / (grid_size - 1);
        for (int j = 0; j < grid_size; ++j) {
            const double a1 = lo + (hi - lo) * j / (grid_size - 1);
            const double q = q_fn(a0, a1);
            require(std::isfinite(q), ErrorKind::Numeric, "landscape_2d: q_fn returned non-finite");

            const double x0 = std::atanh(a0);
            const double x1 = std::atanh(a1);
            double neg = q;
            double sig = q;
            if (std::abs(x0 - mu_pre[0]) <= band && std::abs(x1 - mu_pre[1]) <= band) {
                const double lp0 = squashed_log_density(a0, mu_pre[0], sigma_pi);
                const double lp1 = squashed_log_density(a1, mu_pre[1], sigma_pi);
                neg = q + alpha * (-(lp0 + lp1));
                sig = q + alpha * cfg.h_max *
                              (stable_sigmoid((-lp0 - cfg.m) / cfg.t) +
                               stable_sigmoid((-lp1 - cfg.m) / cfg.t));
            }
            out << fmt(a0) << ',' << fmt(a1) << ',' << fmt(q) << ',' << fmt(neg) << ',' << fmt(sig)
                << "\n";
        }
    }
    require(out.good(), ErrorKind::Io, "write to '" + path + "' failed");
}

MetricsSink::MetricsSink(const std::string& path) : path_(path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot open metrics file '" + path + "' for writing");
    out << header() << "\n";
    require(out.good(), ErrorKind::Io, "write to metrics file '" + path + "' failed");
}

const char* MetricsSink::header() {
    return "step,success_rate,mean_episode_steps,mean_q,q_std_window,ood_ratio,alpha,"
           "mean_entropy,actor_loss,critic_loss_1,critic_loss_2,cql_term_mean";
}

void MetricsSink::write(const MetricsRow& row) {
    const double fields[] = {row.success_rate, row.mean_episode_steps, row.mean_q,
                             row.q_std_window, row.ood_ratio,          row.alpha,
                             row.mean_entropy, row.actor_loss,         row.critic_loss_1,
                             row.critic_loss_2, row.cql_term_mean};
    for (double f : fields) {
        require(std::isfinite(f), ErrorKind::Numeric, "metrics row contains a non-finite value");
    }
    std::ofstream out(path_, std::ios::app);
    require(out.good(), ErrorKind::Io, "cannot append to metrics file '" + path_ + "'");
    out << row.step;
    for (double f : fields) out << ',' << fmt(f);
    out << "\n";
    out.flush();
    require(out.good(), ErrorKind::Io, "write to metrics file '" + path_ + "' failed");
}

std::vector<MetricsRow> MetricsSink::read(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open metrics file '" + path + "'");
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Structural,
            path + ": missing metrics header");
    require(line == header(), ErrorKind::Structural, path + ": metrics header mismatch");

    std::vector<MetricsRow> rows;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            require(end == tok.c_str() + tok.size() && !tok.empty(), ErrorKind::Parse,
                    path + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
            vals.push_back(v);
        }
        require(vals.size() == 12, ErrorKind::Structural,
                path + ":" + std::to_string(line_no) + ": expected 12 columns, got " +
                    std::to_string(vals.size()));
        MetricsRow r;
        r.step = static_cast<long long>(vals[0]);
        r.success_rate = vals[1];
        r.mean_episode_steps = vals[2];
        r.mean_q = vals[3];
        r.q_std_window = vals[4];
        r.ood_ratio = vals[5];
        r.alpha = vals[6];
        r.mean_entropy = vals[7];
        r.actor_loss = vals[8];
        r.critic_loss_1 = vals[9];
        r.critic_loss_2 = vals[10];
        r.cql_term_mean = vals[11];
        rows.push_back(r);
    }
    return rows;
}

}  // namespace sigent
