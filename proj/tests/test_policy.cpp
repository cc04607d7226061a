#include <doctest.h>

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "policy.hpp"
#include "rng.hpp"

using namespace sigent;

namespace {

GaussianHead make_head(double mu, double sigma) {
    GaussianHead h;
    h.mu = Vector::Constant(1, mu);
    h.log_sigma = Vector::Constant(1, std::log(sigma));
    return h;
}

// Trapezoid integral of the squashed density over the action interval via
// the substitution a = tanh(x): integral of exp(lp(x)) * (1 - tanh(x)^2) dx.
// The Jacobian is computed directly from tanh, independent of the softplus
// identity the library uses inside lp.
double integrate_density(const GaussianHead& head, int points) {
    double mu = head.mu(0), sigma = std::exp(head.log_sigma(0));
    double lo = mu - 10.0 * sigma, hi = mu + 10.0 * sigma;
    double step = (hi - lo) / (points - 1);
    double total = 0.0;
    for (int i = 0; i < points; ++i) {
        double x = lo + step * i;
        Vector v = Vector::Constant(1, x);
        double th = std::tanh(x);
        double log_jac = std::log1p(-th * th);
        double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
        total += w * std::exp(log_prob_per_dim(head, v)(0) + log_jac) * step;
    }
    return total;
}

Matrix random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("log density matches hand-computed reference points") {
    // Standard normal at its mean, no squash correction at x = 0.
    GaussianHead std_head = make_head(0.0, 1.0);
    Vector x0 = Vector::Zero(1);
    CHECK(log_prob_per_dim(std_head, x0)(0) == doctest::Approx(-0.91893853320467274).epsilon(1e-14));

    // x = 0.5: subtract both the Gaussian exponent and log(1 - tanh(0.5)^2).
    Vector x1 = Vector::Constant(1, 0.5);
    double tanh_half = 0.46211715726000974;
    double expect = -0.5 * 0.25 - 0.91893853320467274 - std::log1p(-tanh_half * tanh_half);
    CHECK(log_prob_per_dim(std_head, x1)(0) == doctest::Approx(expect).epsilon(1e-13));

    // Scale family: lp(mu; mu, sigma) = -log sigma - 0.5 log 2pi - log(1 - tanh(mu)^2)
    GaussianHead h2 = make_head(0.3, 0.25);
    Vector xm = Vector::Constant(1, 0.3);
    double t = std::tanh(0.3);
    CHECK(log_prob_per_dim(h2, xm)(0) ==
          doctest::Approx(-std::log(0.25) - 0.91893853320467274 - std::log1p(-t * t)).epsilon(1e-13));
}

TEST_CASE("squash correction stays finite far into the tails") {
    GaussianHead head = make_head(0.0, 1.0);
    for (double x : {-300.0, -40.0, 40.0, 300.0}) {
        Vector v = Vector::Constant(1, x);
        double lp = log_prob_per_dim(head, v)(0);
        CHECK(std::isfinite(lp));
        // the correction grows like 2|x|, so the surprisal must exceed that
        CHECK(-lp >= 2.0 * std::abs(x) - 2.0);
    }
}

TEST_CASE("squashed density integrates to one over the action interval") {
    // (pre-squash mean, sigma) pairs spanning centered, shifted, tight, wide
    std::vector<std::pair<double, double>> cases = {
        {0.0, 1.0}, {0.3, 0.7}, {0.5, 0.5}, {-1.0, 0.3}, {1.5, 2.0}};
    for (auto [mu, sigma] : cases) {
        double z = integrate_density(make_head(mu, sigma), 40001);
        INFO("mu=", mu, " sigma=", sigma, " integral=", z);
        CHECK(std::abs(z - 1.0) <= 1e-3);
    }
}

TEST_CASE("bounded entropy stays strictly inside the open interval") {
    EntropyConfig cfg;
    cfg.h_max = 1.3;
    cfg.m = 2.0;
    cfg.t = 0.7;
    Rng rng(99);
    const int d = 2;
    for (int trial = 0; trial < 10000; ++trial) {
        GaussianHead head;
        head.mu = Vector(d);
        head.log_sigma = Vector(d);
        for (int i = 0; i < d; ++i) {
            head.mu(i) = rng.uniform(-3.0, 3.0);
            head.log_sigma(i) = rng.uniform(kLogSigmaMin, kLogSigmaMax);
        }
        SquashedSample s = sample(head, rng);
        double h = sigmoid_entropy(s.per_dim_log_prob, cfg);
        REQUIRE(h > 0.0);
        REQUIRE(h < d * cfg.h_max);
    }
}

TEST_CASE("bounded entropy is monotone in surprisal and symmetric about the center") {
    EntropyConfig cfg;
    cfg.h_max = 2.0;
    cfg.m = 1.0;
    cfg.t = 0.5;
    double prev = -1.0;
    for (double surprisal : {-3.0, -1.0, 0.0, 0.9999, 1.0, 1.0001, 2.0, 10.0}) {
        Vector lp = Vector::Constant(1, -surprisal);
        double h = sigmoid_entropy(lp, cfg);
        CHECK(h > prev);
        prev = h;
    }
    // at the center the sigmoid sits at one half
    CHECK(sigmoid_entropy(Vector::Constant(1, -cfg.m), cfg) == doctest::Approx(cfg.h_max * 0.5).epsilon(1e-12));
    // symmetric deviations sum to h_max
    double lo = sigmoid_entropy(Vector::Constant(1, -(cfg.m - 0.4)), cfg);
    double hi = sigmoid_entropy(Vector::Constant(1, -(cfg.m + 0.4)), cfg);
    CHECK(lo + hi == doctest::Approx(cfg.h_max).epsilon(1e-12));
}

TEST_CASE("negative-entropy surrogate is the plain surprisal sum") {
    Vector lp(3);
    lp << -0.5, 1.25, -2.0;
    CHECK(default_entropy(lp) == doctest::Approx(1.25).epsilon(1e-15));
    EntropyConfig cfg;
    CHECK(entropy_estimate(lp, EntropyMode::Negative, cfg) == doctest::Approx(1.25));
    CHECK(entropy_estimate(lp, EntropyMode::Sigmoid, cfg) == doctest::Approx(sigmoid_entropy(lp, cfg)));
}

TEST_CASE("sampling consumes one normal draw per dimension in order") {
    GaussianHead head;
    head.mu = Vector(3);
    head.mu << 0.2, -0.4, 1.0;
    head.log_sigma = Vector(3);
    head.log_sigma << 0.0, -1.0, 0.5;

    Rng rng_a(1234);
    SquashedSample via_rng = sample(head, rng_a);

    Rng rng_b(1234);
    Vector eps(3);
    for (int i = 0; i < 3; ++i) eps(i) = rng_b.normal();
    SquashedSample via_eps = sample_with_noise(head, eps);

    CHECK((via_rng.pre_squash - via_eps.pre_squash).cwiseAbs().maxCoeff() == 0.0);
    CHECK((via_rng.action - via_eps.action).cwiseAbs().maxCoeff() == 0.0);
    CHECK((via_rng.per_dim_log_prob - via_eps.per_dim_log_prob).cwiseAbs().maxCoeff() == 0.0);

    // reparameterization arithmetic
    for (int i = 0; i < 3; ++i) {
        CHECK(via_eps.pre_squash(i) ==
              doctest::Approx(head.mu(i) + std::exp(head.log_sigma(i)) * eps(i)).epsilon(1e-15));
        CHECK(via_eps.action(i) == doctest::Approx(std::tanh(via_eps.pre_squash(i))).epsilon(1e-15));
    }
}

TEST_CASE("batched heads and log densities agree with the scalar path") {
    Rng rng(17);
    Mlp net = make_policy_net(4, 2, {16, 16}, Activation::Relu);
    net.init(rng, 0.01);
    // push half the log-sigma outputs out of range so the clamp is exercised
    net.biases[1](0, 2) = 7.0;
    net.biases[1](0, 3) = -9.0;

    Matrix states = random_matrix(5, 4, rng);
    HeadBatch hb = heads_from_net(net, states);
    CHECK(hb.log_sigma.maxCoeff() <= kLogSigmaMax);
    CHECK(hb.log_sigma.minCoeff() >= kLogSigmaMin);

    Matrix eps = draw_noise(5, 2, rng);
    Matrix pre = sample_pre_squash(hb, eps);
    Matrix lp = log_prob_per_dim(hb, pre);
    Matrix means = mean_actions(hb);

    for (int r = 0; r < 5; ++r) {
        GaussianHead head = head_from_net(net, states.row(r).transpose());
        CHECK((hb.mu.row(r).transpose() - head.mu).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((hb.log_sigma.row(r).transpose() - head.log_sigma).cwiseAbs().maxCoeff() <= 1e-14);
        SquashedSample s = sample_with_noise(head, eps.row(r).transpose());
        CHECK((pre.row(r).transpose() - s.pre_squash).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((lp.row(r).transpose() - s.per_dim_log_prob).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((means.row(r).transpose() - mean_action(head)).cwiseAbs().maxCoeff() <= 1e-14);
    }

    Vector h_sig = entropy_rows(lp, EntropyMode::Sigmoid, EntropyConfig{});
    Vector h_neg = entropy_rows(lp, EntropyMode::Negative, EntropyConfig{});
    for (int r = 0; r < 5; ++r) {
        Vector row = lp.row(r).transpose();
        CHECK(h_sig(r) == doctest::Approx(sigmoid_entropy(row, EntropyConfig{})).epsilon(1e-13));
        CHECK(h_neg(r) == doctest::Approx(default_entropy(row)).epsilon(1e-13));
    }
}

TEST_CASE("tape sampling reproduces plain arithmetic and reaches the parameters") {
    Rng rng(23);
    Mlp net = make_policy_net(3, 2, {8}, Activation::Tanh);
    net.init(rng, 0.01);
    Matrix states = random_matrix(4, 3, rng);
    Matrix eps = draw_noise(4, 2, rng);

    HeadBatch hb = heads_from_net(net, states);
    Matrix pre = sample_pre_squash(hb, eps);
    Matrix lp_plain = log_prob_per_dim(hb, pre);

    Tape t;
    TapeNet tn = put_on_tape(t, net, true);
    PolicySampleNodes n = sample_on_tape(t, tn, t.constant(states), eps);

    CHECK((t.value(n.mu) - hb.mu).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((t.value(n.log_sigma) - hb.log_sigma).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((t.value(n.pre_squash) - pre).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((t.value(n.action) - pre.array().tanh().matrix()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((t.value(n.per_dim_log_prob) - lp_plain).cwiseAbs().maxCoeff() <= 1e-12);

    EntropyConfig ecfg;
    ecfg.h_max = 1.5;
    ecfg.m = 1.0;
    ecfg.t = 0.5;
    Value ent = entropy_on_tape(t, n.per_dim_log_prob, EntropyMode::Sigmoid, ecfg);
    Vector ent_plain = entropy_rows(lp_plain, EntropyMode::Sigmoid, ecfg);
    CHECK((t.value(ent).col(0) - ent_plain).cwiseAbs().maxCoeff() <= 1e-12);

    t.backward(t.mean_all(ent));
    MlpGrads g = collect_grads(t, tn);
    double total = 0.0;
    for (const Matrix& w : g.weights) total += w.cwiseAbs().sum();
    CHECK(total > 0.0);  // entropy gradients flow back into the network
}

TEST_CASE("negative-mode tape entropy equals the row surprisal sum") {
    Tape t;
    Matrix lp(2, 3);
    lp << -0.5, -1.0, 0.25, -2.0, -0.5, -0.75;
    Value v = t.constant(lp);
    Matrix h = t.value(entropy_on_tape(t, v, EntropyMode::Negative, EntropyConfig{}));
    CHECK(h(0, 0) == doctest::Approx(1.25));
    CHECK(h(1, 0) == doctest::Approx(3.25));
}

TEST_CASE("mean actions on tape are the squashed mu columns") {
    Rng rng(29);
    Mlp net = make_policy_net(2, 2, {6}, Activation::Relu);
    net.init(rng, 0.01);
    Matrix states = random_matrix(3, 2, rng);

    Tape t;
    TapeNet tn = put_on_tape(t, net, true);
    Matrix mean_tape = t.value(mean_action_on_tape(t, tn, t.constant(states)));
    Matrix mean_plain = mean_actions(heads_from_net(net, states));
    CHECK((mean_tape - mean_plain).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("policy contract violations are rejected") {
    GaussianHead head = make_head(0.0, 1.0);
    Vector wrong(2);
    wrong << 0.0, 0.0;
    CHECK_THROWS_AS((void)log_prob_per_dim(head, wrong), Error);
    CHECK_THROWS_AS((void)sample_with_noise(head, wrong), Error);

    EntropyConfig bad;
    bad.h_max = 0.0;
    CHECK_THROWS_AS((void)sigmoid_entropy(Vector::Zero(1), bad), Error);
    bad.h_max = 1.0;
    bad.t = 0.0;
    CHECK_THROWS_AS((void)sigmoid_entropy(Vector::Zero(1), bad), Error);

    // odd-width network cannot be a policy head
    Mlp odd({2, 3}, Activation::Relu);
    Vector s(2);
    s << 0.1, 0.2;
    CHECK_THROWS_AS((void)head_from_net(odd, s), Error);
}
