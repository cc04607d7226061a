#include "policy.hpp"

#include <cmath>

namespace sigent {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)
constexpr double kLog2 = 0.69314718055994530942;

double softplus(double x) {
    double a = std::abs(x);
    return std::max(x, 0.0) + std::log1p(std::exp(-a));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 - tanh(x)^2) without catastrophic cancellation at large |x|.
double log_one_minus_tanh_sq(double x) { return 2.0 * (kLog2 - x - softplus(-2.0 * x)); }

}  // namespace

Mlp make_policy_net(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act) {
    std::vector<int> sizes;
    sizes.push_back(state_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(2 * action_dim);
    return Mlp(sizes, act);
}

GaussianHead head_from_net(const Mlp& net, const Vector& state) {
    Vector out = net.forward(state);
    require(out.size() % 2 == 0, ErrorKind::Structural, "policy: network output width must be 2*action_dim");
    int d = static_cast<int>(out.size()) / 2;
    GaussianHead head;
    head.mu = out.head(d);
    head.log_sigma = out.tail(d).cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax);
    return head;
}

SquashedSample sample(const GaussianHead& head, Rng& rng) {
    Vector eps(head.mu.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
    return sample_with_noise(head, eps);
}

SquashedSample sample_with_noise(const GaussianHead& head, const Vector& eps) {
    require(eps.size() == head.mu.size(), ErrorKind::Structural, "policy: noise length mismatch");
    SquashedSample s;
    s.noise = eps;
    s.pre_squash = head.mu + head.log_sigma.array().exp().matrix().cwiseProduct(eps);
    s.action = s.pre_squash.array().tanh();
    s.per_dim_log_prob = log_prob_per_dim(head, s.pre_squash);
    return s;
}

Vector log_prob_per_dim(const GaussianHead& head, const Vector& pre_squash) {
    require(pre_squash.size() == head.mu.size(), ErrorKind::Structural, "policy: pre_squash length mismatch");
    Vector lp(pre_squash.size());
    for (Eigen::Index i = 0; i < lp.size(); ++i) {
        double ls = head.log_sigma(i);
        double z = (pre_squash(i) - head.mu(i)) * std::exp(-ls);
        lp(i) = -0.5 * z * z - ls - kHalfLog2Pi - log_one_minus_tanh_sq(pre_squash(i));
    }
    return lp;
}

Vector mean_action(const GaussianHead& head) { return head.mu.array().tanh(); }

double sigmoid_entropy(const Vector& per_dim_log_prob, const EntropyConfig& cfg) {
    require(cfg.h_max > 0.0 && cfg.t > 0.0, ErrorKind::Config, "entropy: h_max and t must be positive");
    double h = 0.0;
    for (Eigen::Index i = 0; i < per_dim_log_prob.size(); ++i) {
        double surprisal = -per_dim_log_prob(i);
        h += cfg.h_max * stable_sigmoid((surprisal - cfg.m) / cfg.t);
    }
    return h;
}

double default_entropy(const Vector& per_dim_log_prob) { return -per_dim_log_prob.sum(); }

double entropy_estimate(const Vector& per_dim_log_prob, EntropyMode mode, const EntropyConfig& cfg) {
    return mode == EntropyMode::Sigmoid ? sigmoid_entropy(per_dim_log_prob, cfg)
                                        : default_entropy(per_dim_log_prob);
}

HeadBatch heads_from_net(const Mlp& net, const Matrix& states) {
    Matrix out = net.forward(states);
    require(out.cols() % 2 == 0, ErrorKind::Structural, "policy: network output width must be 2*action_dim");
    int d = static_cast<int>(out.cols()) / 2;
    HeadBatch hb;
    hb.mu = out.leftCols(d);
    hb.log_sigma = out.rightCols(d).cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax);
    return hb;
}

Matrix sample_pre_squash(const HeadBatch& heads, const Matrix& eps) {
    return heads.mu + heads.log_sigma.array().exp().matrix().cwiseProduct(eps);
}

Matrix log_prob_per_dim(const HeadBatch& heads, const Matrix& pre_squash) {
    Matrix z = (pre_squash - heads.mu).cwiseProduct((-heads.log_sigma).array().exp().matrix());
    Matrix lp = -0.5 * z.cwiseProduct(z) - heads.log_sigma;
    lp.array() -= kHalfLog2Pi;
    lp -= pre_squash.unaryExpr([](double x) { return log_one_minus_tanh_sq(x); });
    return lp;
}

Matrix mean_actions(const HeadBatch& heads) { return heads.mu.array().tanh(); }

Vector entropy_rows(const Matrix& per_dim_log_prob, EntropyMode mode, const EntropyConfig& cfg) {
    Vector h(per_dim_log_prob.rows());
    for (Eigen::Index r = 0; r < per_dim_log_prob.rows(); ++r) {
        Vector row = per_dim_log_prob.row(r).transpose();
        h(r) = entropy_estimate(row, mode, cfg);
    }
    return h;
}

Matrix draw_noise(int rows, int cols, Rng& rng) {
    Matrix eps(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) eps(r, c) = rng.normal();
    return eps;
}

PolicySampleNodes sample_on_tape(Tape& t, const TapeNet& policy, Value states, const Matrix& eps) {
    Value out = policy.apply(t, states);
    int d = static_cast<int>(t.value(out).cols()) / 2;
    require(eps.rows() == t.value(out).rows() && eps.cols() == d, ErrorKind::Structural,
            "policy: noise shape mismatch");

    PolicySampleNodes n;
    n.mu = t.slice_cols(out, 0, d);
    n.log_sigma = t.clamp(t.slice_cols(out, d, d), kLogSigmaMin, kLogSigmaMax);
    Value sigma = t.exp(n.log_sigma);
    n.pre_squash = t.add(n.mu, t.mul(sigma, t.constant(eps)));
    n.action = t.tanh(n.pre_squash);

    // -0.5*z^2 - log_sigma - 0.5*log(2pi) - log(1 - tanh(x)^2)
    Value z = t.mul(t.sub(n.pre_squash, n.mu), t.exp(t.neg(n.log_sigma)));
    Value gauss = t.add_scalar(t.sub(t.scale(t.mul(z, z), -0.5), n.log_sigma), -kHalfLog2Pi);
    Value corr = t.scale(t.add_scalar(t.neg(t.add(n.pre_squash, t.softplus(t.scale(n.pre_squash, -2.0)))), kLog2), 2.0);
    n.per_dim_log_prob = t.sub(gauss, corr);
    return n;
}

Value mean_action_on_tape(Tape& t, const TapeNet& policy, Value states) {
    Value out = policy.apply(t, states);
    int d = static_cast<int>(t.value(out).cols()) / 2;
    return t.tanh(t.slice_cols(out, 0, d));
}

Value entropy_on_tape(Tape& t, Value per_dim_log_prob, EntropyMode mode, const EntropyConfig& cfg) {
    if (mode == EntropyMode::Negative) return t.row_sum(t.neg(per_dim_log_prob));
    require(cfg.h_max > 0.0 && cfg.t > 0.0, ErrorKind::Config, "entropy: h_max and t must be positive");
    Value surprisal = t.neg(per_dim_log_prob);
    Value arg = t.scale(t.add_scalar(surprisal, -cfg.m), 1.0 / cfg.t);
    return t.row_sum(t.scale(t.sigmoid(arg), cfg.h_max));
}

}  // namespace sigent
