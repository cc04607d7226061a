#include "runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "errors.hpp"
#include "mlp.hpp"

namespace sigent {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kStreamDemoDegradation = 8;

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << content;
    require(out.good(), ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace

std::string make_run_id(const std::string& root, uint64_t seed, const std::string& hint) {
    std::string base;
    if (!hint.empty()) {
        base = hint;
    } else {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm_utc);
        base = std::string(buf) + "-seed" + std::to_string(seed);
    }
    std::string id = base;
    int suffix = 1;
    while (fs::exists(fs::path(root) / id)) {
        id = base + "-" + std::to_string(++suffix);
    }
    return id;
}

RunOutcome run_training(RunSetup setup, const std::vector<std::string>& cli_overrides,
                        const std::string& run_id_hint) {
    const std::vector<ArmOverride> arm_changes = normalize_for_arm(setup.train);
    setup.train.validate();

    std::error_code ec;
    fs::create_directories(setup.run_root, ec);
    require(!ec, ErrorKind::Io, "cannot create run root '" + setup.run_root + "'");

    const std::string run_id = make_run_id(setup.run_root, setup.train.seed, run_id_hint);
    const fs::path dir = fs::path(setup.run_root) / run_id;
    fs::create_directories(dir / "checkpoints", ec);
    require(!ec, ErrorKind::Io, "cannot create run directory '" + dir.string() + "'");

    const ConfigMap resolved = serialize_config(setup);
    const std::string resolved_text = config_to_text(resolved);
    write_text((dir / "config.resolved").string(), resolved_text);

    nlohmann::json manifest;
    manifest["run_id"] = run_id;
    manifest["env"] = setup.train.env_name;
    manifest["seed"] = setup.train.seed;
    manifest["config_hash"] = hash_hex(fnv1a64(resolved_text));
    manifest["demo_hash"] = setup.demo_path.empty() ? "" : file_hash_hex(setup.demo_path);
    manifest["resolved_config"] = resolved;
    manifest["cli_overrides"] = cli_overrides;
    {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : arm_changes) {
            arr.push_back({{"key", c.key}, {"from", c.from}, {"to", c.to}});
        }
        manifest["arm_overrides"] = arr;
    }
    manifest["artifacts"] = {
        {"metrics", "metrics.csv"},
        {"checkpoints", "checkpoints"},
        {"final_policy", "policy_final.sgnt"},
        {"final_q1", "q1_final.sgnt"},
        {"final_q2", "q2_final.sgnt"},
        {"config", "config.resolved"},
    };
    manifest["status"] = "running";
    const std::string manifest_path = (dir / "manifest.json").string();
    write_text(manifest_path, manifest.dump(2) + "\n");

    auto finalize = [&](const std::string& status) {
        manifest["status"] = status;
        write_text(manifest_path, manifest.dump(2) + "\n");
    };

    RunOutcome outcome;
    outcome.run_dir = dir.string();
    try {
        ExpertBuffer expert;
        const ExpertBuffer* expert_ptr = nullptr;
        if (!setup.demo_path.empty()) {
            Rng degradation_rng(derive_seed(setup.train.seed, kStreamDemoDegradation));
            expert = load_expert(setup, degradation_rng);
            expert_ptr = &expert;
        }

        auto env = make_env(setup.train.env_name);

        MetricsSink metrics((dir / "metrics.csv").string());
        RunSinks sinks;
        sinks.metrics = &metrics;
        sinks.checkpoint = [&](long long step, const Mlp& policy) {
            char name[64];
            std::snprintf(name, sizeof(name), "policy_step%08lld.sgnt", step);
            save_mlp(policy, (dir / "checkpoints" / name).string());
        };
        sinks.divergence = [&](const std::string& json) {
            write_text((dir / "divergence_snapshot.json").string(), json + "\n");
        };

        outcome.result = train(setup.train, *env, expert_ptr, sinks);

        save_mlp(outcome.result.actor.net, (dir / "policy_final.sgnt").string());
        save_mlp(outcome.result.critic.q1, (dir / "q1_final.sgnt").string());
        save_mlp(outcome.result.critic.q2, (dir / "q2_final.sgnt").string());
        outcome.status = "completed";
        finalize("completed");
    } catch (const Error& e) {
        finalize(e.kind() == ErrorKind::Numeric ? "diverged" : "failed");
        throw;
    } catch (...) {
        finalize("failed");
        throw;
    }
    return outcome;
}

std::vector<RunOutcome> run_sweep(const RunSetup& base, const std::string& sweep_path,
                                  const std::vector<std::string>& cli_overrides, int jobs) {
    require(jobs >= 1, ErrorKind::Config, "sweep jobs must be at least 1");
    std::ifstream in(sweep_path);
    require(in.good(), ErrorKind::Io, "cannot open sweep file '" + sweep_path + "'");

    // One cell per line; validate every cell before launching anything.
    struct Cell {
        RunSetup setup;
        std::string id_hint;
    };
    std::vector<Cell> cells;
    const ConfigMap base_map = serialize_config(base);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (size_t h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
        std::istringstream ss(line);
        std::string tok;
        ConfigMap cell_map = base_map;
        bool any = false;
        std::string hint_suffix;
        while (ss >> tok) {
            apply_override(cell_map, tok);
            any = true;
            std::string frag = tok;
            for (char& c : frag) {
                if (c == '=' ) c = '_';
                if (c == '.') c = '-';
            }
            hint_suffix += "-" + frag;
        }
        if (!any) continue;
        Cell cell;
        cell.setup = resolve_config(cell_map);
        cell.setup.train.validate();
        cell.id_hint = "cell" + std::to_string(cells.size() + 1) + hint_suffix +
                       "-seed" + std::to_string(cell.setup.train.seed);
        cells.push_back(std::move(cell));
    }
    require(!cells.empty(), ErrorKind::Config, "sweep file '" + sweep_path + "' has no cells");

    std::vector<RunOutcome> outcomes(cells.size());
    if (jobs == 1) {
        for (size_t i = 0; i < cells.size(); ++i) {
            outcomes[i] = run_training(cells[i].setup, cli_overrides, cells[i].id_hint);
        }
        return outcomes;
    }

    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                outcomes[i] = run_training(cells[i].setup, cli_overrides, cells[i].id_hint);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return outcomes;
}

}  // namespace sigent
