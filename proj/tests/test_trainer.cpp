#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "envs.hpp"
#include "errors.hpp"
#include "runner.hpp"
#include "trainer.hpp"

using namespace sigent;

namespace fs = std::filesystem;

namespace {

// Linear policy head whose mean drives straight at the goal at (almost) full
// speed; log_sigma fixed at the clamp ceiling so only mean-action evaluation
// can succeed reliably.
Mlp goal_seeker_net() {
    Mlp net({4, 4}, Activation::Relu);
    net.weights[0].setZero();
    net.biases[0].setZero();
    net.weights[0].row(0) << -50.0, 0.0, 50.0, 0.0;
    net.weights[0].row(1) << 0.0, -50.0, 0.0, 50.0;
    net.biases[0](0, 2) = 2.0;
    net.biases[0](0, 3) = 2.0;
    return net;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.env_name = "point-reach";
    cfg.hidden = {16, 16};
    cfg.total_steps = 50;
    cfg.warmup_steps = 10;
    cfg.batch_size = 8;
    cfg.eval_every = 50;
    cfg.eval_episodes = 2;
    cfg.seed = 11;
    return cfg;
}

ExpertBuffer reach_expert_buffer(uint64_t seed) {
    auto env = make_env("point-reach");
    auto expert = make_expert("point-reach");
    Rng rng(seed);
    std::vector<Transition> episode = record_demo(*env, *expert, rng);
    compute_return_to_go(episode, 0.99);
    return ExpertBuffer::from_transitions(std::move(episode));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    std::string path;
    explicit TempDir(const char* name)
        : path(std::string("/tmp/sigent_run_") + name + "_" + std::to_string(::getpid())) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());

    cfg.eval_every = 51;  // exceeds total_steps
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.eval_every = 50;

    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.batch_size = 8;

    cfg.hidden = {};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.hidden = {16, -2};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.hidden = {16};

    cfg.total_steps = 0;  // legal: a no-op run
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("baseline arm normalization") {
    SUBCASE("sac-with-prior forces its four fields and records each change") {
        TrainConfig cfg = tiny_config();
        cfg.arm = Arm::SacWithPrior;
        cfg.entropy_mode = EntropyMode::Sigmoid;
        cfg.gbc.lambda_bc = 1.0;
        cfg.critic.lambda_ood = 1.0;
        cfg.expert_to_buffer = false;
        auto changes = normalize_for_arm(cfg);
        REQUIRE(changes.size() == 4);
        CHECK(cfg.entropy_mode == EntropyMode::Negative);
        CHECK(cfg.gbc.lambda_bc == 0.0);
        CHECK(cfg.critic.lambda_ood == 0.0);
        CHECK(cfg.expert_to_buffer);
        CHECK(changes[0].key == "train.entropy_mode");
        CHECK(changes[1].key == "gbc.lambda_bc");
        CHECK(changes[1].from == "1");
        CHECK(changes[1].to == "0");
        // idempotent
        CHECK(normalize_for_arm(cfg).empty());
    }
    SUBCASE("the main arm is left untouched") {
        TrainConfig cfg = tiny_config();
        cfg.gbc.lambda_bc = 1.0;
        CHECK(normalize_for_arm(cfg).empty());
        CHECK(cfg.gbc.lambda_bc == 1.0);
    }
}

TEST_CASE("evaluate") {
    SUBCASE("a goal-seeking policy succeeds every episode despite max log_sigma") {
        auto env = make_env("point-reach");
        Mlp net = goal_seeker_net();
        Rng rng(77);
        EvalReport r = evaluate(net, *env, 20, rng);
        CHECK(r.success_rate == 1.0);  // mean action only; sampling at sigma e^2 could not do this
        CHECK(r.mean_episode_steps < 60.0);
        CHECK(r.mean_q == 0.0);  // no critic attached
    }
    SUBCASE("an untrained near-zero policy goes nowhere on point-push") {
        auto env = make_env("point-push");
        Rng init(3);
        Actor a = Actor::make(6, 2, {32, 32}, Activation::Relu, 3e-4, init);
        Rng rng(78);
        EvalReport r = evaluate(a.net, *env, 20, rng);
        CHECK(r.success_rate <= 0.1);
        CHECK(r.mean_episode_steps == 400.0);
    }
    SUBCASE("single successful episode gives rate exactly 1.0") {
        auto env = make_env("point-reach");
        Mlp net = goal_seeker_net();
        Rng rng(79);
        EvalReport r = evaluate(net, *env, 1, rng);
        CHECK(r.success_rate == 1.0);
    }
    SUBCASE("same rng seed reproduces the report exactly") {
        auto env = make_env("point-reach");
        Rng init(4);
        Actor a = Actor::make(4, 2, {16}, Activation::Tanh, 3e-4, init);
        Rng r1(80), r2(80);
        EvalReport e1 = evaluate(a.net, *env, 5, r1);
        EvalReport e2 = evaluate(a.net, *env, 5, r2);
        CHECK(e1.success_rate == e2.success_rate);
        CHECK(e1.mean_episode_steps == e2.mean_episode_steps);
    }
    SUBCASE("zero episodes is a config error") {
        auto env = make_env("point-reach");
        Mlp net = goal_seeker_net();
        Rng rng(81);
        CHECK_THROWS_AS((void)evaluate(net, *env, 0, rng), Error);
    }
}

TEST_CASE("record_demo returns a successful episode") {
    auto env = make_env("point-push");
    auto expert = make_expert("point-push");
    Rng rng(31);
    std::vector<Transition> episode = record_demo(*env, *expert, rng);
    REQUIRE(!episode.empty());
    CHECK(episode.back().done);
    CHECK(episode.back().reward == 1.0);
    for (size_t i = 0; i + 1 < episode.size(); ++i) {
        CHECK(episode[i].reward == 0.0);
        CHECK(!episode[i].done);
        CHECK(episode[i].next_state == episode[i + 1].state);
    }
}

TEST_CASE("training loop bookkeeping") {
    SUBCASE("zero total steps does nothing") {
        TrainConfig cfg = tiny_config();
        cfg.total_steps = 0;
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, nullptr, {});
        CHECK(res.steps_run == 0);
        CHECK(res.critic_updates == 0);
        CHECK(res.actor_updates == 0);
        CHECK(res.rows.empty());
    }
    SUBCASE("batch larger than everything collected: zero updates") {
        TrainConfig cfg = tiny_config();
        cfg.total_steps = 40;
        cfg.eval_every = 40;
        cfg.warmup_steps = 0;
        cfg.batch_size = 4096;
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, nullptr, {});
        CHECK(res.steps_run == 40);
        CHECK(res.critic_updates == 0);
        CHECK(res.actor_updates == 0);
        CHECK(res.soft_updates == 0);
        REQUIRE(res.rows.size() == 1);  // eval still happens
        CHECK(res.rows[0].critic_loss_1 == 0.0);
    }
    SUBCASE("one critic, one actor, one soft update per post-warmup step") {
        // transitions enter the buffer when their episode finalizes (returns
        // need the whole episode), so pre-fill it with the mirrored demo to
        // pin down exactly when the batch guard opens
        TrainConfig cfg = tiny_config();  // N=50, warmup=10, batch=8
        cfg.expert_to_buffer = true;
        ExpertBuffer expert = reach_expert_buffer(7);
        REQUIRE(expert.size() >= 8);
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, &expert, {});
        CHECK(res.steps_run == 50);
        CHECK(res.critic_updates == 40);
        CHECK(res.actor_updates == 40);
        CHECK(res.soft_updates == 40);
        REQUIRE(res.rows.size() == 1);
        CHECK(res.rows[0].step == 50);

        // without the pre-fill no episode finishes inside 50 steps, the
        // buffer stays empty, and the guard never opens
        cfg.expert_to_buffer = false;
        auto env2 = make_env(cfg.env_name);
        TrainResult bare = train(cfg, *env2, nullptr, {});
        CHECK(bare.critic_updates == 0);
    }
    SUBCASE("eval cadence emits one row per eval_every steps") {
        TrainConfig cfg = tiny_config();
        cfg.total_steps = 200;
        cfg.eval_every = 50;
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, nullptr, {});
        REQUIRE(res.rows.size() == 4);
        for (int i = 0; i < 4; ++i) CHECK(res.rows[i].step == 50 * (i + 1));
    }
    SUBCASE("early stop at threshold zero stops at the first eval") {
        TrainConfig cfg = tiny_config();
        cfg.total_steps = 300;
        cfg.eval_every = 100;
        cfg.early_stop_success = 0.0;
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, nullptr, {});
        CHECK(res.stopped_early);
        CHECK(res.steps_run == 100);
        CHECK(res.rows.size() == 1);
    }
    SUBCASE("mirrored demo makes updates possible with few env steps") {
        TrainConfig cfg = tiny_config();
        cfg.total_steps = 20;
        cfg.eval_every = 20;
        cfg.warmup_steps = 0;
        cfg.batch_size = 16;
        ExpertBuffer expert = reach_expert_buffer(1);
        REQUIRE(expert.size() >= 16);
        auto env = make_env(cfg.env_name);

        cfg.expert_to_buffer = false;
        TrainResult without = train(cfg, *env, &expert, {});
        CHECK(without.critic_updates == 0);

        cfg.expert_to_buffer = true;
        auto env2 = make_env(cfg.env_name);
        TrainResult with = train(cfg, *env2, &expert, {});
        CHECK(with.critic_updates == 20);  // guard open from the first step
    }
    SUBCASE("demo with the wrong dimensions is rejected") {
        TrainConfig cfg = tiny_config();
        cfg.env_name = "point-push";
        ExpertBuffer expert = reach_expert_buffer(2);  // 4-dim states
        auto env = make_env("point-push");
        try {
            (void)train(cfg, *env, &expert, {});
            FAIL("expected validation error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Validation);
        }
    }
}

TEST_CASE("identical config and seed reproduce the metrics file bitwise") {
    TrainConfig cfg = tiny_config();
    cfg.total_steps = 400;
    cfg.eval_every = 100;
    cfg.batch_size = 32;
    cfg.warmup_steps = 50;
    cfg.gbc.lambda_bc = 0.5;
    cfg.critic.lambda_ood = 1.0;
    cfg.critic.n_ood = 2;
    cfg.seed = 5;
    ExpertBuffer expert = reach_expert_buffer(3);

    auto run = [&](const std::string& path, uint64_t seed) {
        TrainConfig c = cfg;
        c.seed = seed;
        auto env = make_env(c.env_name);
        MetricsSink sink(path);
        RunSinks sinks;
        sinks.metrics = &sink;
        (void)train(c, *env, &expert, sinks);
        return read_file(path);
    };

    std::string p1 = "/tmp/sigent_det_a_" + std::to_string(::getpid()) + ".csv";
    std::string p2 = "/tmp/sigent_det_b_" + std::to_string(::getpid()) + ".csv";
    const std::string a = run(p1, 5);
    const std::string b = run(p2, 5);
    CHECK(a == b);
    CHECK(a.find("\n") != std::string::npos);
    const std::string c = run(p2, 6);
    CHECK(a != c);  // a different seed must actually change the run
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("alpha auto mode moves alpha toward the entropy target") {
    TrainConfig cfg = tiny_config();
    cfg.total_steps = 300;
    cfg.eval_every = 300;
    cfg.warmup_steps = 50;
    cfg.batch_size = 32;
    cfg.alpha_mode = AlphaMode::Auto;
    cfg.critic.alpha = 0.2;
    cfg.alpha_lr = 3e-3;

    SUBCASE("unreachably high target inflates alpha") {
        cfg.target_entropy = 50.0;
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, nullptr, {});
        CHECK(res.final_alpha > 0.2);
    }
    SUBCASE("impossible low target shrinks alpha but never below zero") {
        cfg.target_entropy = -50.0;
        cfg.entropy_mode = EntropyMode::Sigmoid;  // estimate stays in (0, d*h_max)
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, nullptr, {});
        CHECK(res.final_alpha < 0.2);
        CHECK(res.final_alpha > 0.0);
    }
    SUBCASE("fixed mode leaves alpha alone") {
        cfg.alpha_mode = AlphaMode::Fixed;
        auto env = make_env(cfg.env_name);
        TrainResult res = train(cfg, *env, nullptr, {});
        CHECK(res.final_alpha == 0.2);
    }
}

TEST_CASE("divergence aborts with a parseable snapshot") {
    TrainConfig cfg = tiny_config();
    cfg.total_steps = 200;
    cfg.eval_every = 200;
    cfg.warmup_steps = 0;
    cfg.batch_size = 8;
    cfg.critic_lr = 1e150;  // guarantees overflow within a few updates

    std::string snapshot;
    RunSinks sinks;
    sinks.divergence = [&](const std::string& json) { snapshot = json; };

    auto env = make_env(cfg.env_name);
    try {
        (void)train(cfg, *env, nullptr, sinks);
        FAIL("expected numeric abort");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
    REQUIRE(!snapshot.empty());
    nlohmann::json j = nlohmann::json::parse(snapshot);
    CHECK(j.contains("step"));
    CHECK(j.contains("what"));
    CHECK(j.contains("param_norms"));
    CHECK(j.contains("batch"));
    CHECK(j["step"].get<long long>() >= 1);
}

TEST_CASE("run_training writes the full artifact set") {
    TempDir tmp("artifacts");
    RunSetup setup;
    setup.run_root = tmp.path;
    setup.train = tiny_config();
    setup.train.total_steps = 200;
    setup.train.eval_every = 100;
    setup.train.batch_size = 32;
    setup.train.warmup_steps = 150;
    setup.train.hidden = {8, 8};

    RunOutcome out = run_training(setup, {"train.seed=11"}, "unit-artifacts");
    CHECK(out.status == "completed");
    CHECK(out.run_dir == tmp.path + "/unit-artifacts");

    nlohmann::json manifest = nlohmann::json::parse(read_file(out.run_dir + "/manifest.json"));
    CHECK(manifest["status"] == "completed");
    CHECK(manifest["run_id"] == "unit-artifacts");
    CHECK(manifest["seed"] == 11);
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
    CHECK(manifest["demo_hash"] == "");
    CHECK(manifest["cli_overrides"][0] == "train.seed=11");
    CHECK(manifest["arm_overrides"].empty());
    CHECK(manifest["resolved_config"].contains("optim.alpha_lr"));

    // resolved config snapshot reparses and matches its own hash
    const std::string resolved_text = read_file(out.run_dir + "/config.resolved");
    CHECK(hash_hex(fnv1a64(resolved_text)) == manifest["config_hash"].get<std::string>());
    RunSetup re = resolve_config(parse_config_text(resolved_text, "resolved"));
    CHECK(re.train.total_steps == 200);
    CHECK(re.train.hidden == std::vector<int>{8, 8});

    auto rows = MetricsSink::read(out.run_dir + "/metrics.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].step == 100);
    CHECK(rows[1].step == 200);

    CHECK(fs::exists(out.run_dir + "/checkpoints/policy_step00000100.sgnt"));
    CHECK(fs::exists(out.run_dir + "/checkpoints/policy_step00000200.sgnt"));
    for (const char* f : {"/policy_final.sgnt", "/q1_final.sgnt", "/q2_final.sgnt"}) {
        Mlp net = load_mlp(out.run_dir + f);
        CHECK(net.layer_count() == 3);
    }
    CHECK(!fs::exists(out.run_dir + "/divergence_snapshot.json"));

    // a second run with the same hint gets a fresh directory
    RunOutcome out2 = run_training(setup, {}, "unit-artifacts");
    CHECK(out2.run_dir == tmp.path + "/unit-artifacts-2");
}

TEST_CASE("run_training on the baseline arm records its overrides") {
    TempDir tmp("arm");
    RunSetup setup;
    setup.run_root = tmp.path;
    setup.train = tiny_config();
    setup.train.total_steps = 60;
    setup.train.eval_every = 60;
    setup.train.hidden = {8};
    setup.train.arm = Arm::SacWithPrior;
    setup.train.gbc.lambda_bc = 1.0;

    RunOutcome out = run_training(setup, {}, "arm-check");
    nlohmann::json manifest = nlohmann::json::parse(read_file(out.run_dir + "/manifest.json"));
    CHECK(manifest["arm_overrides"].size() >= 3);
    CHECK(manifest["resolved_config"]["gbc.lambda_bc"] == "0");
    CHECK(manifest["resolved_config"]["train.entropy_mode"] == "negative");
}

TEST_CASE("run_training finalizes the manifest as diverged on numeric aborts") {
    TempDir tmp("diverge");
    RunSetup setup;
    setup.run_root = tmp.path;
    setup.train = tiny_config();
    setup.train.total_steps = 200;
    setup.train.eval_every = 200;
    setup.train.warmup_steps = 0;
    setup.train.batch_size = 8;
    setup.train.critic_lr = 1e150;

    CHECK_THROWS_AS((void)run_training(setup, {}, "diverge-check"), Error);
    const std::string dir = tmp.path + "/diverge-check";
    nlohmann::json manifest = nlohmann::json::parse(read_file(dir + "/manifest.json"));
    CHECK(manifest["status"] == "diverged");
    CHECK(fs::exists(dir + "/divergence_snapshot.json"));
    nlohmann::json snap = nlohmann::json::parse(read_file(dir + "/divergence_snapshot.json"));
    CHECK(snap.contains("param_norms"));
}

TEST_CASE("sweep driver") {
    TempDir tmp("sweep");
    RunSetup base;
    base.run_root = tmp.path;
    base.train = tiny_config();
    base.train.total_steps = 40;
    base.train.eval_every = 40;
    base.train.warmup_steps = 40;
    base.train.hidden = {8};

    std::string sweep_path = tmp.path + "_cells.txt";
    SUBCASE("each cell becomes an isolated completed run") {
        {
            fs::create_directories(tmp.path);
            std::ofstream out(sweep_path);
            out << "# two cells\n"
                << "train.seed=1 gbc.lambda_bc=0.5\n"
                << "\n"
                << "train.seed=2 gbc.lambda_bc=5\n";
        }
        auto outcomes = run_sweep(base, sweep_path, {}, 1);
        REQUIRE(outcomes.size() == 2);
        CHECK(outcomes[0].status == "completed");
        CHECK(outcomes[1].status == "completed");
        CHECK(outcomes[0].run_dir != outcomes[1].run_dir);
        nlohmann::json m1 = nlohmann::json::parse(read_file(outcomes[0].run_dir + "/manifest.json"));
        CHECK(m1["resolved_config"]["gbc.lambda_bc"] == "0.5");
        CHECK(m1["seed"] == 1);
    }
    SUBCASE("a bad cell aborts before anything runs") {
        {
            fs::create_directories(tmp.path);
            std::ofstream out(sweep_path);
            out << "train.seed=1\n"
                << "no.such_key=1\n";
        }
        CHECK_THROWS_AS((void)run_sweep(base, sweep_path, {}, 1), Error);
        int dirs = 0;
        for (auto& e : fs::directory_iterator(tmp.path)) {
            (void)e;
            ++dirs;
        }
        CHECK(dirs == 0);
    }
    SUBCASE("an empty sweep file is a config error") {
        {
            fs::create_directories(tmp.path);
            std::ofstream out(sweep_path);
            out << "# nothing here\n";
        }
        CHECK_THROWS_AS((void)run_sweep(base, sweep_path, {}, 1), Error);
    }
    std::remove(sweep_path.c_str());
}
