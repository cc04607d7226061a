#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace sigent {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip trailing comment introduced by " #"
        if (size_t h = line.find(" #"); h != std::string::npos) line = line.substr(0, h);
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        require(eq != std::string::npos, ErrorKind::Parse,
                origin + ":" + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        require(!key.empty(), ErrorKind::Parse,
                origin + ":" + std::to_string(line_no) + ": empty key");
        require(!out.count(key), ErrorKind::Parse,
                origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        out[key] = value;
    }
    return out;
}

ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

void apply_override(ConfigMap& cfg, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::Config,
            "override must be key=value, got '" + assignment + "'");
    cfg[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

namespace {

double parse_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    require(!v.empty() && end == v.c_str() + v.size() && std::isfinite(x), ErrorKind::Config,
            "config key '" + key + "': expected a number, got '" + v + "'");
    return x;
}

long long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    require(!v.empty() && end == v.c_str() + v.size(), ErrorKind::Config,
            "config key '" + key + "': expected an integer, got '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw_error(ErrorKind::Config, "config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        out.push_back(static_cast<int>(parse_int(key, trim(tok))));
    }
    require(!out.empty(), ErrorKind::Config, "config key '" + key + "': empty list");
    return out;
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

RunSetup resolve_config(const ConfigMap& cfg) {
    RunSetup s;
    TrainConfig& t = s.train;

    for (const auto& [key, v] : cfg) {
        if (key == "env.name") t.env_name = v;
        else if (key == "demo.path") s.demo_path = v;
        else if (key == "demo.degradation") {
            if (v == "none") s.degradation = Degradation::None;
            else if (v == "drop") s.degradation = Degradation::Drop;
            else if (v == "action-noise") s.degradation = Degradation::ActionNoise;
            else if (v == "state-noise") s.degradation = Degradation::StateNoise;
            else throw_error(ErrorKind::Config,
                             "config key 'demo.degradation': expected none|drop|action-noise|"
                             "state-noise, got '" + v + "'");
        }
        else if (key == "demo.drop_rate") s.drop_rate = parse_real(key, v);
        else if (key == "demo.noise_sigma") s.noise_sigma = parse_real(key, v);
        else if (key == "run.root") s.run_root = v;
        else if (key == "train.total_steps") t.total_steps = parse_int(key, v);
        else if (key == "train.batch_size") t.batch_size = static_cast<int>(parse_int(key, v));
        else if (key == "train.warmup_steps") t.warmup_steps = parse_int(key, v);
        else if (key == "train.eval_every") t.eval_every = parse_int(key, v);
        else if (key == "train.eval_episodes") t.eval_episodes = static_cast<int>(parse_int(key, v));
        else if (key == "train.seed") t.seed = static_cast<uint64_t>(parse_int(key, v));
        else if (key == "train.entropy_mode") {
            if (v == "sigmoid") t.entropy_mode = EntropyMode::Sigmoid;
            else if (v == "negative") t.entropy_mode = EntropyMode::Negative;
            else throw_error(ErrorKind::Config,
                             "config key 'train.entropy_mode': expected sigmoid|negative, got '" +
                                 v + "'");
        }
        else if (key == "train.alpha_mode") {
            if (v == "fixed") t.alpha_mode = AlphaMode::Fixed;
            else if (v == "auto") t.alpha_mode = AlphaMode::Auto;
            else throw_error(ErrorKind::Config,
                             "config key 'train.alpha_mode': expected fixed|auto, got '" + v + "'");
        }
        else if (key == "train.target_entropy") t.target_entropy = parse_real(key, v);
        else if (key == "train.arm") {
            if (v == "sigent-sac") t.arm = Arm::SigentSac;
            else if (v == "sac-with-prior") t.arm = Arm::SacWithPrior;
            else throw_error(ErrorKind::Config,
                             "config key 'train.arm': expected sigent-sac|sac-with-prior, got '" +
                                 v + "'");
        }
        else if (key == "train.expert_to_buffer") t.expert_to_buffer = parse_bool(key, v);
        else if (key == "train.expert_to_critic") t.expert_to_critic = parse_bool(key, v);
        else if (key == "train.ood_threshold") t.ood_threshold = parse_real(key, v);
        else if (key == "train.early_stop_success") t.early_stop_success = parse_real(key, v);
        else if (key == "entropy.h_max") t.entropy.h_max = parse_real(key, v);
        else if (key == "entropy.m") t.entropy.m = parse_real(key, v);
        else if (key == "entropy.t") t.entropy.t = parse_real(key, v);
        else if (key == "critic.gamma") t.critic.gamma = parse_real(key, v);
        else if (key == "critic.alpha") t.critic.alpha = parse_real(key, v);
        else if (key == "critic.beta") t.critic.beta = parse_real(key, v);
        else if (key == "critic.lambda_ood") t.critic.lambda_ood = parse_real(key, v);
        else if (key == "critic.n_ood") t.critic.n_ood = static_cast<int>(parse_int(key, v));
        else if (key == "critic.use_mc_lower_bound") t.critic.use_mc_lower_bound = parse_bool(key, v);
        else if (key == "critic.tau") t.critic.tau = parse_real(key, v);
        else if (key == "gbc.gate_mode") {
            if (v == "l2") t.gbc.gate_mode = GateMode::L2Norm;
            else if (v == "per-dim-mse") t.gbc.gate_mode = GateMode::PerDimMse;
            else throw_error(ErrorKind::Config,
                             "config key 'gbc.gate_mode': expected l2|per-dim-mse, got '" + v + "'");
        }
        else if (key == "gbc.epsilon") t.gbc.epsilon = parse_real(key, v);
        else if (key == "gbc.epsilon_bc") t.gbc.epsilon_bc = parse_real(key, v);
        else if (key == "gbc.lambda_bc") t.gbc.lambda_bc = parse_real(key, v);
        else if (key == "actor.q_mode") {
            if (v == "min") t.q_mode = QMode::MinQ;
            else if (v == "q1") t.q_mode = QMode::Q1Only;
            else throw_error(ErrorKind::Config,
                             "config key 'actor.q_mode': expected min|q1, got '" + v + "'");
        }
        else if (key == "net.hidden") t.hidden = parse_int_list(key, v);
        else if (key == "net.activation") {
            if (v == "relu") t.activation = Activation::Relu;
            else if (v == "tanh") t.activation = Activation::Tanh;
            else throw_error(ErrorKind::Config,
                             "config key 'net.activation': expected relu|tanh, got '" + v + "'");
        }
        else if (key == "optim.actor_lr") t.actor_lr = parse_real(key, v);
        else if (key == "optim.critic_lr") t.critic_lr = parse_real(key, v);
        else if (key == "optim.alpha_lr") t.alpha_lr = parse_real(key, v);
        else if (key == "replay.capacity") {
            const long long c = parse_int(key, v);
            require(c > 0, ErrorKind::Config, "config key 'replay.capacity': must be positive");
            t.replay_capacity = static_cast<size_t>(c);
        }
        else throw_error(ErrorKind::Config, "unknown config key '" + key + "'");
    }
    return s;
}

ConfigMap serialize_config(const RunSetup& s) {
    const TrainConfig& t = s.train;
    ConfigMap m;
    m["env.name"] = t.env_name;
    m["demo.path"] = s.demo_path;
    switch (s.degradation) {
        case Degradation::None: m["demo.degradation"] = "none"; break;
        case Degradation::Drop: m["demo.degradation"] = "drop"; break;
        case Degradation::ActionNoise: m["demo.degradation"] = "action-noise"; break;
        case Degradation::StateNoise: m["demo.degradation"] = "state-noise"; break;
    }
    m["demo.drop_rate"] = fmt_real(s.drop_rate);
    m["demo.noise_sigma"] = fmt_real(s.noise_sigma);
    m["run.root"] = s.run_root;
    m["train.total_steps"] = std::to_string(t.total_steps);
    m["train.batch_size"] = std::to_string(t.batch_size);
    m["train.warmup_steps"] = std::to_string(t.warmup_steps);
    m["train.eval_every"] = std::to_string(t.eval_every);
    m["train.eval_episodes"] = std::to_string(t.eval_episodes);
    m["train.seed"] = std::to_string(t.seed);
    m["train.entropy_mode"] = t.entropy_mode == EntropyMode::Sigmoid ? "sigmoid" : "negative";
    m["train.alpha_mode"] = t.alpha_mode == AlphaMode::Fixed ? "fixed" : "auto";
    m["train.target_entropy"] = fmt_real(t.target_entropy);
    m["train.arm"] = t.arm == Arm::SigentSac ? "sigent-sac" : "sac-with-prior";
    m["train.expert_to_buffer"] = t.expert_to_buffer ? "true" : "false";
    m["train.expert_to_critic"] = t.expert_to_critic ? "true" : "false";
    m["train.ood_threshold"] = fmt_real(t.ood_threshold);
    m["train.early_stop_success"] = fmt_real(t.early_stop_success);
    m["entropy.h_max"] = fmt_real(t.entropy.h_max);
    m["entropy.m"] = fmt_real(t.entropy.m);
    m["entropy.t"] = fmt_real(t.entropy.t);
    m["critic.gamma"] = fmt_real(t.critic.gamma);
    m["critic.alpha"] = fmt_real(t.critic.alpha);
    m["critic.beta"] = fmt_real(t.critic.beta);
    m["critic.lambda_ood"] = fmt_real(t.critic.lambda_ood);
    m["critic.n_ood"] = std::to_string(t.critic.n_ood);
    m["critic.use_mc_lower_bound"] = t.critic.use_mc_lower_bound ? "true" : "false";
    m["critic.tau"] = fmt_real(t.critic.tau);
    m["gbc.gate_mode"] = t.gbc.gate_mode == GateMode::L2Norm ? "l2" : "per-dim-mse";
    m["gbc.epsilon"] = fmt_real(t.gbc.epsilon);
    m["gbc.epsilon_bc"] = fmt_real(t.gbc.epsilon_bc);
    m["gbc.lambda_bc"] = fmt_real(t.gbc.lambda_bc);
    m["actor.q_mode"] = t.q_mode == QMode::MinQ ? "min" : "q1";
    {
        std::string h;
        for (size_t i = 0; i < t.hidden.size(); ++i) {
            if (i) h += ',';
            h += std::to_string(t.hidden[i]);
        }
        m["net.hidden"] = h;
    }
    m["net.activation"] = t.activation == Activation::Relu ? "relu" : "tanh";
    m["optim.actor_lr"] = fmt_real(t.actor_lr);
    m["optim.critic_lr"] = fmt_real(t.critic_lr);
    m["optim.alpha_lr"] = fmt_real(t.alpha_lr);
    m["replay.capacity"] = std::to_string(t.replay_capacity);
    return m;
}

std::string config_to_text(const ConfigMap& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

uint64_t fnv1a64(const std::string& content) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : content) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open '" + path + "' for hashing");
    std::stringstream ss;
    ss << in.rdbuf();
    return hash_hex(fnv1a64(ss.str()));
}

ExpertBuffer load_expert(const RunSetup& setup, Rng& degradation_rng, DemoHeader* header) {
    DemoHeader h;
    std::vector<Transition> episode = load_demo_episode(setup.demo_path, &h);
    compute_return_to_go(episode, h.gamma);

    switch (setup.degradation) {
        case Degradation::None:
            break;
        case Degradation::Drop:
            episode = degrade_drop(episode, setup.drop_rate, degradation_rng);
            break;
        case Degradation::ActionNoise:
            episode = degrade_action_noise(episode, setup.noise_sigma, degradation_rng);
            break;
        case Degradation::StateNoise:
            episode = degrade_state_noise(episode, setup.noise_sigma, degradation_rng);
            break;
    }
    if (header) *header = h;
    return ExpertBuffer::from_transitions(std::move(episode));
}

}  // namespace sigent
