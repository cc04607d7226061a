#include "replay.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace sigent {

namespace {

void check_transition(const Transition& t, const char* where) {
    require(t.state.size() > 0, ErrorKind::Validation, std::string(where) + ": empty state");
    require(t.action.size() > 0, ErrorKind::Validation, std::string(where) + ": empty action");
    require(t.next_state.size() == t.state.size(), ErrorKind::Validation,
            std::string(where) + ": state/next_state dimension mismatch");
    for (int i = 0; i < t.action.size(); ++i) {
        require(std::abs(t.action[i]) <= 1.0, ErrorKind::Validation,
                std::string(where) + ": action component outside [-1, 1]");
    }
    require(std::isfinite(t.reward), ErrorKind::Validation, std::string(where) + ": non-finite reward");
}

}  // namespace

void compute_return_to_go(std::vector<Transition>& episode, double gamma) {
    require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::Config, "return_to_go: gamma must lie in [0, 1]");
    double g = 0.0;
    for (auto it = episode.rbegin(); it != episode.rend(); ++it) {
        g = it->reward + gamma * (it->done ? 0.0 : g);
        it->return_to_go = g;
    }
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    require(capacity > 0, ErrorKind::Config, "replay capacity must be positive");
    storage_.reserve(std::min<size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    check_transition(t, "replay push");
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
    } else {
        storage_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

void ReplayBuffer::finalize_episode(std::vector<Transition> episode, double gamma) {
    if (episode.empty()) return;
    compute_return_to_go(episode, gamma);
    for (auto& t : episode) push(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(size_t batch_size, Rng& rng) const {
    require(!storage_.empty(), ErrorKind::Validation, "cannot sample from an empty replay buffer");
    std::vector<Transition> out;
    out.reserve(batch_size);
    for (size_t i = 0; i < batch_size; ++i) {
        out.push_back(storage_[rng.integer(storage_.size())]);
    }
    return out;
}

ExpertBuffer ExpertBuffer::from_transitions(std::vector<Transition> transitions) {
    require(!transitions.empty(), ErrorKind::Validation, "expert buffer requires at least one transition");
    for (const auto& t : transitions) {
        check_transition(t, "expert buffer");
        require(t.return_to_go.has_value(), ErrorKind::Structural,
                "expert transitions must carry return_to_go");
    }
    ExpertBuffer b;
    b.data_ = std::move(transitions);
    return b;
}

std::vector<Transition> ExpertBuffer::sample(size_t batch_size, Rng& rng) const {
    std::vector<Transition> out;
    out.reserve(batch_size);
    for (size_t i = 0; i < batch_size; ++i) {
        out.push_back(data_[rng.integer(data_.size())]);
    }
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& tok, size_t line_no, const std::string& path) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    require(end == tok.c_str() + tok.size() && !tok.empty(), ErrorKind::Parse,
            path + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
    return v;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) toks.push_back(t);
    return toks;
}

}  // namespace

void save_demo(const std::vector<Transition>& episode, double gamma, const std::string& path) {
    require(!episode.empty(), ErrorKind::Validation, "refusing to save an empty demo");
    const int sd = static_cast<int>(episode.front().state.size());
    const int ad = static_cast<int>(episode.front().action.size());
    for (const auto& t : episode) {
        check_transition(t, "save_demo");
        require(t.state.size() == sd && t.action.size() == ad, ErrorKind::Validation,
                "save_demo: inconsistent transition dimensions");
    }
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << "demo state_dim=" << sd << " action_dim=" << ad << " gamma=" << format_double(gamma) << "\n";
    for (const auto& t : episode) {
        for (int i = 0; i < sd; ++i) out << format_double(t.state[i]) << ' ';
        for (int i = 0; i < ad; ++i) out << format_double(t.action[i]) << ' ';
        out << format_double(t.reward) << ' ';
        for (int i = 0; i < sd; ++i) out << format_double(t.next_state[i]) << ' ';
        out << (t.done ? 1 : 0) << "\n";
    }
    require(out.good(), ErrorKind::Io, "write to '" + path + "' failed");
}

std::vector<Transition> load_demo_episode(const std::string& path, DemoHeader* header) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open demo file '" + path + "'");

    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, path + ":1: missing header line");
    DemoHeader h;
    {
        auto toks = split_ws(line);
        require(toks.size() == 4 && toks[0] == "demo", ErrorKind::Parse,
                path + ":1: header must be 'demo state_dim=<n> action_dim=<n> gamma=<g>'");
        auto field = [&](const std::string& tok, const char* key) {
            const std::string prefix = std::string(key) + "=";
            require(tok.rfind(prefix, 0) == 0, ErrorKind::Parse,
                    path + ":1: expected '" + prefix + "...', got '" + tok + "'");
            return tok.substr(prefix.size());
        };
        h.state_dim = static_cast<int>(parse_double(field(toks[1], "state_dim"), 1, path));
        h.action_dim = static_cast<int>(parse_double(field(toks[2], "action_dim"), 1, path));
        h.gamma = parse_double(field(toks[3], "gamma"), 1, path);
        require(h.state_dim > 0 && h.action_dim > 0, ErrorKind::Parse, path + ":1: non-positive dimensions");
        require(h.gamma >= 0.0 && h.gamma <= 1.0, ErrorKind::Parse, path + ":1: gamma outside [0, 1]");
    }

    const size_t expected = 2 * static_cast<size_t>(h.state_dim) + h.action_dim + 2;
    std::vector<Transition> eps;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto toks = split_ws(line);
        require(toks.size() == expected, ErrorKind::Parse,
                path + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                    " fields, got " + std::to_string(toks.size()));
        Transition t;
        size_t k = 0;
        t.state.resize(h.state_dim);
        for (int i = 0; i < h.state_dim; ++i) t.state[i] = parse_double(toks[k++], line_no, path);
        t.action.resize(h.action_dim);
        for (int i = 0; i < h.action_dim; ++i) t.action[i] = parse_double(toks[k++], line_no, path);
        t.reward = parse_double(toks[k++], line_no, path);
        t.next_state.resize(h.state_dim);
        for (int i = 0; i < h.state_dim; ++i) t.next_state[i] = parse_double(toks[k++], line_no, path);
        const double d = parse_double(toks[k++], line_no, path);
        require(d == 0.0 || d == 1.0, ErrorKind::Parse,
                path + ":" + std::to_string(line_no) + ": done flag must be 0 or 1");
        t.done = d == 1.0;
        for (int i = 0; i < h.action_dim; ++i) {
            require(std::abs(t.action[i]) <= 1.0, ErrorKind::Validation,
                    path + ":" + std::to_string(line_no) + ": action component outside [-1, 1]");
        }
        eps.push_back(std::move(t));
    }
    require(!eps.empty(), ErrorKind::Validation, path + ": demo contains no transitions");
    if (header) *header = h;
    return eps;
}

ExpertBuffer load_demo(const std::string& path, DemoHeader* header) {
    DemoHeader h;
    auto eps = load_demo_episode(path, &h);
    // Return-to-go restarts at every terminal flag, so multi-episode files work.
    compute_return_to_go(eps, h.gamma);
    if (header) *header = h;
    return ExpertBuffer::from_transitions(std::move(eps));
}

namespace {
constexpr double kActionEps = 1e-6;
}

std::vector<Transition> degrade_drop(const std::vector<Transition>& episode, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, ErrorKind::Config, "drop rate must lie in [0, 1)");
    std::vector<Transition> out;
    for (const auto& t : episode) {
        if (rng.uniform() < rate) continue;
        out.push_back(t);
    }
    // Keep at least one transition so downstream buffers stay valid.
    if (out.empty() && !episode.empty()) out.push_back(episode[rng.integer(episode.size())]);
    return out;
}

std::vector<Transition> degrade_action_noise(const std::vector<Transition>& episode, double sigma, Rng& rng) {
    require(sigma >= 0.0, ErrorKind::Config, "action noise sigma must be non-negative");
    std::vector<Transition> out = episode;
    for (auto& t : out) {
        for (int i = 0; i < t.action.size(); ++i) {
            const double v = t.action[i] + sigma * rng.normal();
            t.action[i] = std::clamp(v, -1.0 + kActionEps, 1.0 - kActionEps);
        }
    }
    return out;
}

std::vector<Transition> degrade_state_noise(const std::vector<Transition>& episode, double sigma, Rng& rng) {
    require(sigma >= 0.0, ErrorKind::Config, "state noise sigma must be non-negative");
    std::vector<Transition> out = episode;
    for (auto& t : out) {
        for (int i = 0; i < t.state.size(); ++i) t.state[i] += sigma * rng.normal();
        for (int i = 0; i < t.next_state.size(); ++i) t.next_state[i] += sigma * rng.normal();
    }
    return out;
}

TransitionBatch to_batch(const std::vector<Transition>& transitions) {
    require(!transitions.empty(), ErrorKind::Validation, "to_batch: empty transition list");
    const int b = static_cast<int>(transitions.size());
    const int sd = static_cast<int>(transitions.front().state.size());
    const int ad = static_cast<int>(transitions.front().action.size());

    TransitionBatch out;
    out.states.resize(b, sd);
    out.actions.resize(b, ad);
    out.rewards.resize(b);
    out.next_states.resize(b, sd);
    out.done.resize(b);
    out.return_to_go = Vector::Zero(b);
    out.has_return_to_go = true;
    for (int i = 0; i < b; ++i) {
        const Transition& t = transitions[i];
        require(t.state.size() == sd && t.action.size() == ad, ErrorKind::Validation,
                "to_batch: inconsistent transition dimensions");
        out.states.row(i) = t.state.transpose();
        out.actions.row(i) = t.action.transpose();
        out.rewards[i] = t.reward;
        out.next_states.row(i) = t.next_state.transpose();
        out.done[i] = t.done ? 1.0 : 0.0;
        if (t.return_to_go.has_value()) {
            out.return_to_go[i] = *t.return_to_go;
        } else {
            out.has_return_to_go = false;
        }
    }
    return out;
}

}  // namespace sigent
