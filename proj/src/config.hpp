#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trainer.hpp"

namespace sigent {

// Flat key=value configuration with dotted sections. Lines starting with '#'
// are comments; values keep internal whitespace trimmed at the edges.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text, const std::string& origin);
ConfigMap load_config_file(const std::string& path);

// Applies one "key=value" override string (the CLI --set payload).
void apply_override(ConfigMap& cfg, const std::string& assignment);

enum class Degradation { None, Drop, ActionNoise, StateNoise };

// Everything a single run needs beyond the trainer config.
struct RunSetup {
    TrainConfig train;
    std::string demo_path;  // empty: train without a demonstration
    Degradation degradation = Degradation::None;
    double drop_rate = 0.5;
    double noise_sigma = 0.2;
    std::string run_root = "runs";
};

// Maps the key space onto RunSetup. Every key is optional; unknown keys are
// config errors naming the offending key.
RunSetup resolve_config(const ConfigMap& cfg);

// Total serialization: every effective hyperparameter, including defaults the
// user never set, in sorted key order. resolve(serialize(s)) == s.
ConfigMap serialize_config(const RunSetup& setup);
std::string config_to_text(const ConfigMap& cfg);

uint64_t fnv1a64(const std::string& content);
std::string hash_hex(uint64_t h);
// FNV-1a over a file's bytes; I/O error when unreadable.
std::string file_hash_hex(const std::string& path);

// Loads the demonstration, computes return-to-go from the clean episode, then
// applies the configured degradation. Observation noise and transition drops
// corrupt what the learner sees, not the underlying returns.
ExpertBuffer load_expert(const RunSetup& setup, Rng& degradation_rng, DemoHeader* header = nullptr);

}  // namespace sigent
