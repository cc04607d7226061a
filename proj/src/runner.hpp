#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace sigent {

// Outcome of one managed run. The run directory contains:
//   manifest.json        id, hashes, artifact paths, status, applied overrides
//   config.resolved      total key=value snapshot of the effective config
//   metrics.csv          one row per evaluation
//   checkpoints/         policy_step<step>.sgnt per eval
//   policy_final.sgnt, q1_final.sgnt, q2_final.sgnt
//   divergence_snapshot.json   only on numeric aborts
struct RunOutcome {
    std::string run_dir;
    std::string status;  // completed | diverged | failed
    TrainResult result;
};

// Executes one training run under root/<run_id>/. cli_overrides are recorded
// in the manifest verbatim; arm normalization is applied here and recorded
// too. Throws on failure after finalizing the manifest status.
RunOutcome run_training(RunSetup setup, const std::vector<std::string>& cli_overrides,
                        const std::string& run_id_hint = "");

// Sweep file: one cell per non-comment line, space-separated key=value pairs
// applied on top of the base config. Returns one outcome per cell; a cell
// failure aborts (configs are validated up front).
std::vector<RunOutcome> run_sweep(const RunSetup& base, const std::string& sweep_path,
                                  const std::vector<std::string>& cli_overrides, int jobs);

// timestamp + seed, unique under root (suffixed on collision)
std::string make_run_id(const std::string& root, uint64_t seed, const std::string& hint);

}  // namespace sigent
