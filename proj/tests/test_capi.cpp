#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sigent/sigent.h>

namespace fs = std::filesystem;

namespace {

std::string tmp_root() {
    static std::string root = [] {
        std::string r = "/tmp/sigent_capi_" + std::to_string(::getpid());
        fs::remove_all(r);
        fs::create_directories(r);
        return r;
    }();
    return root;
}

std::string path_in(const char* name) { return tmp_root() + "/" + name; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// One completed tiny training run shared by the checkpoint-consuming tests.
const std::string& trained_run_dir() {
    static std::string dir = [] {
        const std::string cfg_path = path_in("train.cfg");
        {
            std::ofstream out(cfg_path);
            out << "env.name=point-reach\n"
                << "train.total_steps=60\n"
                << "train.eval_every=60\n"
                << "train.eval_episodes=2\n"
                << "train.warmup_steps=60\n"
                << "train.batch_size=16\n"
                << "net.hidden=8,8\n"
                << "run.root=" << tmp_root() << "/runs\n";
        }
        char run_dir[512];
        const char* overrides[] = {"train.seed=3"};
        sigent_status st = sigent_train_run(cfg_path.c_str(), overrides, 1, run_dir,
                                            sizeof(run_dir));
        REQUIRE_MESSAGE(st == SIGENT_OK, sigent_last_error());
        return std::string(run_dir);
    }();
    return dir;
}

}  // namespace

TEST_CASE("environment lifecycle through the c api") {
    sigent_env* env = nullptr;
    REQUIRE(sigent_env_create("point-reach", 9, &env) == SIGENT_OK);
    REQUIRE(env != nullptr);

    int sd = 0, ad = 0, cap = 0;
    CHECK(sigent_env_dims(env, &sd, &ad, &cap) == SIGENT_OK);
    CHECK(sd == 4);
    CHECK(ad == 2);
    CHECK(cap == 200);

    double state[4];
    REQUIRE(sigent_env_reset(env, state) == SIGENT_OK);
    CHECK(state[0] == 0.0);
    CHECK(state[1] == 0.0);

    double action[2] = {1.0, 0.0};
    double reward = -1;
    int done = -1, success = -1;
    REQUIRE(sigent_env_step(env, action, state, &reward, &done, &success) == SIGENT_OK);
    CHECK(state[0] == 0.05);
    CHECK(reward == 0.0);
    CHECK(done == 0);
    CHECK(success == 0);

    SUBCASE("invalid actions map to the validation status") {
        double big[2] = {1.5, 0.0};
        CHECK(sigent_env_step(env, big, state, &reward, &done, &success) ==
              SIGENT_ERR_VALIDATION);
        CHECK(std::string(sigent_last_error()).find("[-1, 1]") != std::string::npos);
    }
    SUBCASE("stepping a finished episode maps to the structural status") {
        double zero[2] = {0.0, 0.0};
        do {
            REQUIRE(sigent_env_step(env, zero, state, &reward, &done, &success) == SIGENT_OK);
        } while (!done);
        CHECK(sigent_env_step(env, zero, state, &reward, &done, &success) ==
              SIGENT_ERR_STRUCTURAL);
        // reset revives it
        CHECK(sigent_env_reset(env, state) == SIGENT_OK);
        CHECK(sigent_env_step(env, zero, state, &reward, &done, &success) == SIGENT_OK);
    }
    sigent_env_destroy(env);
}

TEST_CASE("env creation errors") {
    sigent_env* env = nullptr;
    CHECK(sigent_env_create("no-such-env", 0, &env) == SIGENT_ERR_CONFIG);
    CHECK(env == nullptr);
    std::string msg = sigent_last_error();
    CHECK(msg.find("point-reach") != std::string::npos);
    CHECK(msg.find("point-push") != std::string::npos);

    CHECK(sigent_env_create(nullptr, 0, &env) == SIGENT_ERR_VALIDATION);
    CHECK(sigent_env_create("point-reach", 0, nullptr) == SIGENT_ERR_VALIDATION);
}

TEST_CASE("seeded envs replay identically") {
    sigent_env *a = nullptr, *b = nullptr;
    REQUIRE(sigent_env_create("point-push", 123, &a) == SIGENT_OK);
    REQUIRE(sigent_env_create("point-push", 123, &b) == SIGENT_OK);
    double sa[6], sb[6];
    REQUIRE(sigent_env_reset(a, sa) == SIGENT_OK);
    REQUIRE(sigent_env_reset(b, sb) == SIGENT_OK);
    for (int i = 0; i < 6; ++i) CHECK(sa[i] == sb[i]);
    double action[2] = {0.25, -0.5};
    double ra, rb;
    int da, db, xa, xb;
    for (int t = 0; t < 10; ++t) {
        REQUIRE(sigent_env_step(a, action, sa, &ra, &da, &xa) == SIGENT_OK);
        REQUIRE(sigent_env_step(b, action, sb, &rb, &db, &xb) == SIGENT_OK);
        for (int i = 0; i < 6; ++i) CHECK(sa[i] == sb[i]);
        CHECK(ra == rb);
    }
    sigent_env_destroy(a);
    sigent_env_destroy(b);
}

TEST_CASE("demo recording") {
    const std::string demo = path_in("push.demo");
    int len = 0;
    REQUIRE_MESSAGE(sigent_record_demo("point-push", demo.c_str(), 42, 0.99, &len) == SIGENT_OK,
                    sigent_last_error());
    CHECK(len > 0);
    const std::string content = read_file(demo);
    CHECK(content.find("demo state_dim=6 action_dim=2 gamma=") == 0);
    CHECK((int)std::count(content.begin(), content.end(), '\n') == len + 1);

    CHECK(sigent_record_demo("no-such-env", demo.c_str(), 42, 0.99, &len) == SIGENT_ERR_CONFIG);
    CHECK(sigent_record_demo("point-push", "/nonexistent_dir/x.demo", 42, 0.99, &len) ==
          SIGENT_ERR_IO);
}

TEST_CASE("training through the c api produces a usable run directory") {
    const std::string dir = trained_run_dir();
    CHECK(fs::exists(dir + "/manifest.json"));
    CHECK(fs::exists(dir + "/metrics.csv"));
    CHECK(fs::exists(dir + "/policy_final.sgnt"));
    CHECK(read_file(dir + "/manifest.json").find("\"completed\"") != std::string::npos);

    SUBCASE("missing config file is an io error") {
        char buf[64];
        CHECK(sigent_train_run("/nonexistent_dir/c.cfg", nullptr, 0, buf, sizeof(buf)) ==
              SIGENT_ERR_IO);
    }
    SUBCASE("unknown config keys are config errors naming the key") {
        const std::string bad = path_in("bad.cfg");
        {
            std::ofstream out(bad);
            out << "train.total_stepz=5\n";
        }
        char buf[64];
        CHECK(sigent_train_run(bad.c_str(), nullptr, 0, buf, sizeof(buf)) == SIGENT_ERR_CONFIG);
        CHECK(std::string(sigent_last_error()).find("train.total_stepz") != std::string::npos);
    }
    SUBCASE("malformed override is a config error") {
        const char* overrides[] = {"not-an-assignment"};
        char buf[64];
        CHECK(sigent_train_run((tmp_root() + "/train.cfg").c_str(), overrides, 1, buf,
                               sizeof(buf)) == SIGENT_ERR_CONFIG);
    }
    SUBCASE("SIGENT_RUNS_DIR overrides the configured run root") {
        const std::string env_root = tmp_root() + "/env_runs";
        setenv("SIGENT_RUNS_DIR", env_root.c_str(), 1);
        char buf[512];
        sigent_status st =
            sigent_train_run((tmp_root() + "/train.cfg").c_str(), nullptr, 0, buf, sizeof(buf));
        unsetenv("SIGENT_RUNS_DIR");
        REQUIRE_MESSAGE(st == SIGENT_OK, sigent_last_error());
        CHECK(std::string(buf).find(env_root) == 0);
    }
}

TEST_CASE("policy checkpoints through the c api") {
    const std::string ckpt = trained_run_dir() + "/policy_final.sgnt";

    sigent_policy* policy = nullptr;
    REQUIRE_MESSAGE(sigent_policy_load(ckpt.c_str(), &policy) == SIGENT_OK, sigent_last_error());
    int sd = 0, ad = 0;
    CHECK(sigent_policy_dims(policy, &sd, &ad) == SIGENT_OK);
    CHECK(sd == 4);
    CHECK(ad == 2);
    double state[4] = {0.0, 0.0, 0.5, -0.5};
    double action[2] = {99.0, 99.0};
    REQUIRE(sigent_policy_mean_action(policy, state, action) == SIGENT_OK);
    for (double a : action) {
        CHECK(a > -1.0);
        CHECK(a < 1.0);
    }
    // deterministic: same state, same action
    double again[2];
    REQUIRE(sigent_policy_mean_action(policy, state, again) == SIGENT_OK);
    CHECK(again[0] == action[0]);
    CHECK(again[1] == action[1]);
    sigent_policy_destroy(policy);

    SUBCASE("missing file is an io error") {
        sigent_policy* p = nullptr;
        CHECK(sigent_policy_load("/nonexistent_dir/p.sgnt", &p) == SIGENT_ERR_IO);
    }
    SUBCASE("garbage bytes are a format error mentioning the magic") {
        const std::string bad = path_in("garbage.sgnt");
        {
            std::ofstream out(bad, std::ios::binary);
            out << "XXXXYYYYZZZZ";
        }
        sigent_policy* p = nullptr;
        CHECK(sigent_policy_load(bad.c_str(), &p) == SIGENT_ERR_FORMAT);
        CHECK(std::string(sigent_last_error()).find("magic") != std::string::npos);
    }
    SUBCASE("truncated checkpoint is a format error") {
        const std::string cut = path_in("truncated.sgnt");
        const std::string full = read_file(ckpt);
        {
            std::ofstream out(cut, std::ios::binary);
            out.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
        }
        sigent_policy* p = nullptr;
        CHECK(sigent_policy_load(cut.c_str(), &p) == SIGENT_ERR_FORMAT);
    }
    SUBCASE("a critic checkpoint is rejected as a policy") {
        sigent_policy* p = nullptr;
        CHECK(sigent_policy_load((trained_run_dir() + "/q1_final.sgnt").c_str(), &p) ==
              SIGENT_ERR_FORMAT);
    }
}

TEST_CASE("evaluation through the c api") {
    const std::string ckpt = trained_run_dir() + "/policy_final.sgnt";
    double rate = -1.0, steps = -1.0;
    const std::string report = path_in("eval_report.csv");
    REQUIRE_MESSAGE(sigent_evaluate(ckpt.c_str(), "point-reach", 3, 5, report.c_str(), &rate,
                                    &steps) == SIGENT_OK,
                    sigent_last_error());
    CHECK(rate >= 0.0);
    CHECK(rate <= 1.0);
    CHECK(steps > 0.0);
    CHECK(read_file(report).find("success_rate,mean_episode_steps\n") == 0);

    SUBCASE("same seed reproduces the report") {
        double rate2, steps2;
        REQUIRE(sigent_evaluate(ckpt.c_str(), "point-reach", 3, 5, nullptr, &rate2, &steps2) ==
                SIGENT_OK);
        CHECK(rate2 == rate);
        CHECK(steps2 == steps);
    }
    SUBCASE("zero episodes is a validation error") {
        CHECK(sigent_evaluate(ckpt.c_str(), "point-reach", 0, 5, nullptr, &rate, &steps) ==
              SIGENT_ERR_VALIDATION);
    }
    SUBCASE("dimension mismatch is a validation error") {
        CHECK(sigent_evaluate(ckpt.c_str(), "point-push", 3, 5, nullptr, &rate, &steps) ==
              SIGENT_ERR_VALIDATION);
    }
    SUBCASE("unwritable report path is an io error") {
        CHECK(sigent_evaluate(ckpt.c_str(), "point-reach", 1, 5, "/nonexistent_dir/r.csv", &rate,
                              &steps) == SIGENT_ERR_IO);
    }
}

TEST_CASE("ood diagnosis through the c api") {
    const std::string ckpt = trained_run_dir() + "/policy_final.sgnt";
    const std::string demo = path_in("reach.demo");
    int len = 0;
    REQUIRE(sigent_record_demo("point-reach", demo.c_str(), 7, 0.99, &len) == SIGENT_OK);

    double ratio = -1.0;
    REQUIRE_MESSAGE(sigent_diagnose_ood(ckpt.c_str(), demo.c_str(), 0.3, "l2", &ratio) ==
                    SIGENT_OK, sigent_last_error());
    CHECK(ratio >= 0.0);
    CHECK(ratio <= 1.0);
    REQUIRE(sigent_diagnose_ood(ckpt.c_str(), demo.c_str(), 0.3, "per-dim-mse", &ratio) ==
            SIGENT_OK);
    CHECK(ratio >= 0.0);
    CHECK(ratio <= 1.0);

    CHECK(sigent_diagnose_ood(ckpt.c_str(), demo.c_str(), 0.3, "cosine", &ratio) ==
          SIGENT_ERR_CONFIG);

    const std::string push_demo = path_in("push2.demo");
    REQUIRE(sigent_record_demo("point-push", push_demo.c_str(), 7, 0.99, &len) == SIGENT_OK);
    CHECK(sigent_diagnose_ood(ckpt.c_str(), push_demo.c_str(), 0.3, "l2", &ratio) ==
          SIGENT_ERR_VALIDATION);
}

TEST_CASE("landscape diagnosis through the c api") {
    const std::string out = path_in("landscape.csv");
    REQUIRE_MESSAGE(sigent_diagnose_landscape(out.c_str(), 1.5, 0.1, 0.2, 1.3, 0.0, 1.0, 41, 0.0,
                                              1.5) == SIGENT_OK,
                    sigent_last_error());
    std::ifstream in(out);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "action,q,neg_adjusted,sig_adjusted");
    int rows = 0;
    bool sig_in_band = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        double a, q, neg, sig;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &a, &q, &neg, &sig) == 4);
        CHECK(q == 1.5);
        if (!(sig >= q && sig <= q + 0.2 * 1.3)) sig_in_band = false;
    }
    CHECK(rows == 41);
    CHECK(sig_in_band);

    CHECK(sigent_diagnose_landscape(out.c_str(), 0.0, 0.1, 0.2, 1.3, 0.0, 1.0, 2, 0.0, 1.5) ==
          SIGENT_ERR_CONFIG);
    CHECK(sigent_diagnose_landscape("/nonexistent_dir/l.csv", 0.0, 0.1, 0.2, 1.3, 0.0, 1.0, 11,
                                    0.0, 1.5) == SIGENT_ERR_IO);

    SUBCASE("critic-backed slice") {
        const std::string q1 = trained_run_dir() + "/q1_final.sgnt";
        const std::string q2 = trained_run_dir() + "/q2_final.sgnt";
        double state[4] = {0.0, 0.0, 0.4, 0.4};
        double fixed[2] = {0.0, 0.0};
        const std::string out_q = path_in("landscape_q.csv");
        REQUIRE_MESSAGE(sigent_diagnose_landscape_q(out_q.c_str(), q1.c_str(), q2.c_str(), state,
                                                    4, fixed, 2, 0, 0.1, 0.2, 1.3, 0.0, 1.0, 21,
                                                    0.0, 1.5) == SIGENT_OK,
                        sigent_last_error());
        CHECK(read_file(out_q).find("action,q,neg_adjusted,sig_adjusted") == 0);
        // single-critic variant
        REQUIRE(sigent_diagnose_landscape_q(out_q.c_str(), q1.c_str(), nullptr, state, 4, fixed,
                                            2, 0, 0.1, 0.2, 1.3, 0.0, 1.0, 21, 0.0,
                                            1.5) == SIGENT_OK);
        CHECK(sigent_diagnose_landscape_q(out_q.c_str(), q1.c_str(), nullptr, state, 4, fixed, 2,
                                          5, 0.1, 0.2, 1.3, 0.0, 1.0, 21, 0.0,
                                          1.5) == SIGENT_ERR_VALIDATION);
    }
}

TEST_CASE("sweeps through the c api") {
    const std::string sweep = path_in("cells.txt");
    {
        std::ofstream out(sweep);
        out << "train.seed=21\ntrain.seed=22\n";
    }
    char dirs[2048];
    REQUIRE_MESSAGE(sigent_sweep_run((tmp_root() + "/train.cfg").c_str(), sweep.c_str(), nullptr,
                                     0, 2, dirs, sizeof(dirs)) == SIGENT_OK,
                    sigent_last_error());
    std::istringstream ss(dirs);
    std::string line;
    int count = 0;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        ++count;
        CHECK(fs::exists(line + "/manifest.json"));
    }
    CHECK(count == 2);

    CHECK(sigent_sweep_run((tmp_root() + "/train.cfg").c_str(), "/nonexistent_dir/s.txt", nullptr,
                           0, 1, dirs, sizeof(dirs)) == SIGENT_ERR_IO);
}

TEST_CASE("last error stays meaningful") {
    CHECK(sigent_last_error() != nullptr);
    sigent_env* env = nullptr;
    CHECK(sigent_env_create("bogus", 0, &env) == SIGENT_ERR_CONFIG);
    std::string msg = sigent_last_error();
    CHECK(!msg.empty());
    CHECK(msg.find("bogus") != std::string::npos);
}
