#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"

namespace sigent {

struct EnvSpec {
    std::string name;
    int state_dim = 0;
    int action_dim = 0;
    int max_episode_steps = 0;
};

struct StepResult {
    Vector state;
    double reward = 0.0;  // sparse: 1 on success, else 0
    bool done = false;    // success or step cap
    bool success = false;
};

// Deterministic kinematics; all randomness flows through the Rng passed to
// reset. Actions are per-component velocities in [-1, 1]; anything outside is
// a validation error. Stepping a finished episode is a contract violation.
class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual Vector reset(Rng& rng) = 0;
    virtual StepResult step(const Vector& action) = 0;
};

// Point mass on [-1,1]^2 starting at the origin; state is [agent, goal]. The
// goal is uniform in [-0.8, 0.8]^2, redrawn while closer than 0.3 to the
// start. Success within 0.1 of the goal.
class PointReach : public Env {
public:
    PointReach();
    const EnvSpec& spec() const override { return spec_; }
    Vector reset(Rng& rng) override;
    StepResult step(const Vector& action) override;

private:
    EnvSpec spec_;
    Vector pos_, goal_;
    int steps_ = 0;
    bool active_ = false;
};

// Kinematic pushing on [-1,1]^2; state is [agent, cube, goal]. The agent
// starts at the origin, the cube spawns uniformly in a box, the goal is fixed
// at (0.75, 0). Touching the cube (within the contact radius) displaces it so
// it stays exactly at contact distance. Success when the cube is within 0.12
// of the goal.
class PointPush : public Env {
public:
    PointPush();
    const EnvSpec& spec() const override { return spec_; }
    Vector reset(Rng& rng) override;
    StepResult step(const Vector& action) override;

private:
    EnvSpec spec_;
    Vector agent_, cube_, goal_;
    int steps_ = 0;
    bool active_ = false;
};

// Hand-written demonstrators. Deliberately suboptimal: both route through a
// sideways staging waypoint before heading for the target, leaving clear
// headroom for a learned policy to beat their episode length.
class ScriptedExpert {
public:
    virtual ~ScriptedExpert() = default;
    virtual void reset() = 0;
    virtual Vector act(const Vector& state) = 0;
};

std::unique_ptr<Env> make_env(const std::string& name);
std::unique_ptr<ScriptedExpert> make_expert(const std::string& name);
std::vector<std::string> env_names();

}  // namespace sigent
