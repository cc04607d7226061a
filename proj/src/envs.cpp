#include "envs.hpp"

#include <cmath>

#include "errors.hpp"

namespace sigent {

namespace {

constexpr double kSpeed = 0.05;        // position change per unit action
constexpr double kReachTol = 0.1;
constexpr double kPushGoalTol = 0.3;
constexpr double kContactRadius = 0.11;

void check_action(const Vector& a, int dim, const char* env) {
    require(a.size() == dim, ErrorKind::Validation,
            std::string(env) + ": action has wrong dimension");
    for (int i = 0; i < dim; ++i) {
        require(std::isfinite(a[i]) && std::abs(a[i]) <= 1.0, ErrorKind::Validation,
                std::string(env) + ": action component outside [-1, 1]");
    }
}

Vector clamp_box(Vector v) {
    for (int i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], -1.0, 1.0);
    return v;
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

// Full-speed velocity command toward a target point.
Vector drive_toward(const Vector& pos, const Vector& target) {
    Vector dir = target - pos;
    const double dist = dir.norm();
    Vector a = dist > kSpeed ? Vector(dir / dist) : Vector(dir / kSpeed);
    for (int i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], -1.0, 1.0);
    return a;
}

}  // namespace

PointReach::PointReach() {
    spec_ = EnvSpec{"point-reach", 4, 2, 200};
}

Vector PointReach::reset(Rng& rng) {
    pos_ = Vector::Zero(2);
    goal_.resize(2);
    do {
        goal_[0] = uniform_in(rng, -0.8, 0.8);
        goal_[1] = uniform_in(rng, -0.8, 0.8);
    } while (goal_.norm() < 0.3);
    steps_ = 0;
    active_ = true;
    Vector s(4);
    s << pos_, goal_;
    return s;
}

StepResult PointReach::step(const Vector& action) {
    require(active_, ErrorKind::Structural, "point-reach: step on a finished episode");
    check_action(action, 2, "point-reach");
    pos_ = clamp_box(pos_ + kSpeed * action);
    ++steps_;

    StepResult r;
    r.state.resize(4);
    r.state << pos_, goal_;
    r.success = (pos_ - goal_).norm() < kReachTol;
    r.reward = r.success ? 1.0 : 0.0;
    r.done = r.success || steps_ >= spec_.max_episode_steps;
    if (r.done) active_ = false;
    return r;
}

PointPush::PointPush() {
    spec_ = EnvSpec{"point-push", 6, 2, 400};
}

Vector PointPush::reset(Rng& rng) {
    agent_ = Vector::Zero(2);
    cube_ = Vector(2);
    cube_[0] = uniform_in(rng, -0.2, 0.15);
    cube_[1] = uniform_in(rng, -0.3, 0.3);
    goal_ = Vector(2);
    goal_ << 0.5, 0.0;
    steps_ = 0;
    active_ = true;
    Vector s(6);
    s << agent_, cube_, goal_;
    return s;
}

StepResult PointPush::step(const Vector& action) {
    require(active_, ErrorKind::Structural, "point-push: step on a finished episode");
    check_action(action, 2, "point-push");
    const Vector before = agent_;
    agent_ = clamp_box(agent_ + kSpeed * action);

    Vector offset = cube_ - agent_;
    double dist = offset.norm();
    if (dist < kContactRadius) {
        // Degenerate overlap: push along the agent's movement direction.
        if (dist < 1e-9) {
            Vector move = agent_ - before;
            if (move.norm() > 1e-12) {
                offset = move / move.norm();
            } else {
                offset = Vector::Unit(2, 0);
            }
            dist = 1.0;
        }
        cube_ = clamp_box(agent_ + (kContactRadius / dist) * offset);
    }
    ++steps_;

    StepResult r;
    r.state.resize(6);
    r.state << agent_, cube_, goal_;
    r.success = (cube_ - goal_).norm() < kPushGoalTol;
    r.reward = r.success ? 1.0 : 0.0;
    r.done = r.success || steps_ >= spec_.max_episode_steps;
    if (r.done) active_ = false;
    return r;
}

namespace {

Vector rotate90(const Vector& v) {
    Vector out(2);
    out << -v[1], v[0];
    return out;
}

// Detours through W = goal/2 + 0.6 * perp(goal) before heading to the goal,
// stretching the path by well over 20% even for the farthest goals.
class ReachExpert : public ScriptedExpert {
public:
    void reset() override { phase_ = 0; }
    Vector act(const Vector& state) override {
        require(state.size() == 4, ErrorKind::Validation, "reach expert: bad state size");
        const Vector pos = state.segment(0, 2);
        const Vector goal = state.segment(2, 2);
        const Vector w = 0.5 * goal + 0.6 * rotate90(goal.normalized());
        if (phase_ == 0 && (pos - w).norm() <= 0.06) phase_ = 1;
        return drive_toward(pos, phase_ == 0 ? w : goal);
    }

private:
    int phase_ = 0;
};

// Swings out to a staging point S, lines up behind the cube at P, then keeps
// steering into the cube from the side opposite the goal so it slides toward
// it. The staging leg is the deliberate inefficiency. While traveling the
// expert steers around the cube so it never shoves it by accident (the agent
// can spawn right next to it).
class PushExpert : public ScriptedExpert {
public:
    void reset() override { phase_ = 0; }
    Vector act(const Vector& state) override {
        require(state.size() == 6, ErrorKind::Validation, "push expert: bad state size");
        const Vector pos = state.segment(0, 2);
        const Vector cube = state.segment(2, 2);
        const Vector goal = state.segment(4, 2);
        const Vector u = (cube - goal).normalized();  // away from goal

        // Already lined up behind the cube: push. Steering at a point just
        // inside the contact disc keeps the bite as the cube slides forward.
        const Vector rel = pos - cube;
        const double along = rel.dot(u);
        const double across = (rel - along * u).norm();
        if (phase_ < 2 && along > 0.02 && along < kContactRadius + 0.13 && across <= 0.05) {
            phase_ = 2;
        }
        if (phase_ == 2) return drive_toward(pos, cube + 0.02 * u);

        const Vector p = cube + (kContactRadius + 0.07) * u;
        const Vector s = clamp_box(p + 0.8 * rotate90(u));
        if (phase_ == 0 && (pos - s).norm() <= 0.06) phase_ = 1;
        const Vector target = phase_ == 0 ? s : p;

        Vector v = drive_toward(pos, target);
        const double dist = rel.norm();
        const Vector next = clamp_box(pos + kSpeed * v);
        if ((next - cube).norm() < kContactRadius + 0.05) {
            if (dist < 1e-9) {
                v = -Vector::Unit(2, 0);
            } else if (dist < kContactRadius + 0.03) {
                v = rel / dist;  // too close, back straight off
            } else {
                Vector tangent = rotate90(Vector(-rel / dist));
                if (tangent.dot(target - pos) < 0.0) tangent = -tangent;
                v = tangent;  // skirt around the cube
            }
        }
        return v;
    }

private:
    int phase_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "point-reach") return std::make_unique<PointReach>();
    if (name == "point-push") return std::make_unique<PointPush>();
    std::string known;
    for (const auto& n : env_names()) known += (known.empty() ? "" : ", ") + n;
    throw_error(ErrorKind::Config, "unknown env '" + name + "' (known: " + known + ")");
}

std::unique_ptr<ScriptedExpert> make_expert(const std::string& name) {
    if (name == "point-reach") return std::make_unique<ReachExpert>();
    if (name == "point-push") return std::make_unique<PushExpert>();
    std::string known;
    for (const auto& n : env_names()) known += (known.empty() ? "" : ", ") + n;
    throw_error(ErrorKind::Config, "no expert for env '" + name + "' (known: " + known + ")");
}

std::vector<std::string> env_names() { return {"point-reach", "point-push"}; }

}  // namespace sigent
