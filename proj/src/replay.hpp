#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"

namespace sigent {

struct Transition {
    Vector state;
    Vector action;  // components strictly inside (-1, 1)
    double reward = 0.0;
    Vector next_state;
    bool done = false;
    std::optional<double> return_to_go;  // discounted Monte-Carlo return to episode end
};

// Fills return_to_go backward through one contiguous episode:
// G_t = r_t + gamma * G_{t+1}, terminal G = r.
void compute_return_to_go(std::vector<Transition>& episode, double gamma);

// Ring buffer with uniform with-replacement sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity);

    void push(Transition t);
    // Computes return-to-go for the episode, then pushes every transition.
    void finalize_episode(std::vector<Transition> episode, double gamma);
    std::vector<Transition> sample(size_t batch_size, Rng& rng) const;

    size_t size() const { return storage_.size(); }
    size_t capacity() const { return capacity_; }
    const Transition& at(size_t i) const { return storage_[i]; }

private:
    size_t capacity_;
    size_t next_ = 0;
    std::vector<Transition> storage_;
};

// Demonstration buffer; immutable once constructed.
class ExpertBuffer {
public:
    static ExpertBuffer from_transitions(std::vector<Transition> transitions);

    std::vector<Transition> sample(size_t batch_size, Rng& rng) const;
    size_t size() const { return data_.size(); }
    const Transition& at(size_t i) const { return data_[i]; }
    const std::vector<Transition>& transitions() const { return data_; }

private:
    std::vector<Transition> data_;
};

// Demonstration file: one header line with dimensions and the recording
// discount, then one transition per line as %.17g decimal text. Round trips
// are bit exact for 64-bit floats.
struct DemoHeader {
    int state_dim = 0;
    int action_dim = 0;
    double gamma = 0.0;
};

void save_demo(const std::vector<Transition>& episode, double gamma, const std::string& path);
std::vector<Transition> load_demo_episode(const std::string& path, DemoHeader* header = nullptr);

// Loads a demo file into an expert buffer, recomputing return-to-go with the
// recorded discount. Errors: empty demo, malformed lines (with line number),
// action components outside [-1, 1].
ExpertBuffer load_demo(const std::string& path, DemoHeader* header = nullptr);

// Demonstration degradations for robustness runs. Return-to-go values are the
// ones computed from the clean episode; dropped or noised observations do not
// change the underlying returns.
std::vector<Transition> degrade_drop(const std::vector<Transition>& episode, double rate, Rng& rng);
std::vector<Transition> degrade_action_noise(const std::vector<Transition>& episode, double sigma, Rng& rng);
std::vector<Transition> degrade_state_noise(const std::vector<Transition>& episode, double sigma, Rng& rng);

// Column-major batch view consumed by the loss builders.
struct TransitionBatch {
    Matrix states;       // B x state_dim
    Matrix actions;      // B x action_dim
    Vector rewards;      // B
    Matrix next_states;  // B x state_dim
    Vector done;         // B, 0 or 1
    Vector return_to_go; // B, only meaningful when has_return_to_go
    bool has_return_to_go = false;

    int size() const { return static_cast<int>(states.rows()); }
};

TransitionBatch to_batch(const std::vector<Transition>& transitions);

}  // namespace sigent
