#include "tocm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace tocm {

namespace {

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

struct Entry {
  const char* section;
  const char* key;
  const char* doc;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

long long parse_int(const std::string& v, const std::string& where) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw std::invalid_argument("config: bad integer for '" + where + "': " + v);
  return out;
}

double parse_real(const std::string& v, const std::string& where) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw std::invalid_argument("config: bad number for '" + where + "': " + v);
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad flag for '" + where + "': " + v);
}

#define INT_ENTRY(sec, name, field, doc_text)                                          \
  Entry{sec, #name, doc_text,                                                          \
        [](const TrainConfig& c) { return std::to_string(c.field); },                  \
        [](TrainConfig& c, const std::string& v) {                                     \
          c.field = static_cast<decltype(c.field)>(parse_int(v, sec "." #name));       \
        }}

#define REAL_ENTRY(sec, name, field, doc_text)                                    \
  Entry{sec, #name, doc_text, [](const TrainConfig& c) { return format_real(c.field); }, \
        [](TrainConfig& c, const std::string& v) { c.field = parse_real(v, sec "." #name); }}

#define STR_ENTRY(sec, name, field, doc_text)                              \
  Entry{sec, #name, doc_text, [](const TrainConfig& c) { return c.field; }, \
        [](TrainConfig& c, const std::string& v) { c.field = v; }}

#define BOOL_ENTRY(sec, name, field, doc_text)                                              \
  Entry{sec, #name, doc_text,                                                               \
        [](const TrainConfig& c) { return c.field ? std::string("true") : std::string("false"); }, \
        [](TrainConfig& c, const std::string& v) { c.field = parse_bool(v, sec "." #name); }}

const std::vector<Entry>& schema() {
  static const std::vector<Entry> entries = {
      STR_ENTRY("env", task, task, "task family: coop | hetero (required)"),
      INT_ENTRY("env", n_agents, n_agents, "agents and landmarks (coop: 2..4, hetero: 2 or 4)"),
      INT_ENTRY("env", max_steps, max_steps, "transitions per episode"),
      REAL_ENTRY("env", dt, dt, "integration step"),
      REAL_ENTRY("env", damping, damping, "velocity retained per step"),
      REAL_ENTRY("env", accel, accel, "acceleration scale (coop agents)"),
      REAL_ENTRY("env", radius, radius, "agent radius (coop agents)"),
      REAL_ENTRY("env", hetero_accel_large, hetero_accel_large, "acceleration of large agents"),
      REAL_ENTRY("env", hetero_accel_small, hetero_accel_small, "acceleration of small agents"),
      REAL_ENTRY("env", hetero_radius_large, hetero_radius_large, "radius of large agents"),
      REAL_ENTRY("env", hetero_radius_small, hetero_radius_small, "radius of small agents"),
      REAL_ENTRY("env", collision_penalty, collision_penalty, "reward penalty per overlapping pair"),
      REAL_ENTRY("env", spawn_min, spawn_min, "spawn box lower corner"),
      REAL_ENTRY("env", spawn_max, spawn_max, "spawn box upper corner"),
      BOOL_ENTRY("env", export_traces, export_traces, "write one CSV trace per collected episode"),

      INT_ENTRY("model", det, det, "deterministic state width"),
      INT_ENTRY("model", stoch, stoch, "stochastic state width"),
      INT_ENTRY("model", mental, mental, "mental state width"),
      INT_ENTRY("model", hidden, hidden, "hidden layer width"),
      INT_ENTRY("model", attn_tokens, attn_tokens, "attention token groups in the predictor"),
      INT_ENTRY("model", pad_obs, pad_obs, "observation width after zero padding"),
      INT_ENTRY("model", pad_agents, pad_agents, "agent slots after padding"),
      REAL_ENTRY("model", min_std, min_std, "stddev floor after softplus"),
      REAL_ENTRY("model", free_nats, free_nats, "KL allowance per step"),
      REAL_ENTRY("model", model_lr, model_lr, "world-model Adam step size"),
      REAL_ENTRY("model", model_grad_clip, model_grad_clip, "world-model gradient norm clip"),

      INT_ENTRY("policy", policy_hidden, policy_hidden, "actor/critic hidden width"),
      INT_ENTRY("policy", ppo_passes, ppo_passes, "gradient passes per ppo_update"),
      REAL_ENTRY("policy", policy_lr, policy_lr, "actor Adam step size"),
      REAL_ENTRY("policy", critic_lr, critic_lr, "critic Adam step size"),
      REAL_ENTRY("policy", policy_grad_clip, policy_grad_clip, "policy gradient norm clip"),
      REAL_ENTRY("policy", clip_eps, clip_eps, "PPO clipping radius"),
      REAL_ENTRY("policy", value_coef, value_coef, "critic loss weight"),
      REAL_ENTRY("policy", entropy_coef, entropy_coef, "entropy bonus weight"),
      REAL_ENTRY("policy", discount, discount, "return discount"),
      REAL_ENTRY("policy", gae_lambda, gae_lambda, "advantage mixing parameter"),
      STR_ENTRY("policy", actor, actor, "actor network kind: dense | spiking"),
      REAL_ENTRY("policy", snn_decay, snn_decay, "LIF membrane decay"),
      REAL_ENTRY("policy", snn_threshold, snn_threshold, "LIF firing threshold"),
      REAL_ENTRY("policy", snn_surrogate_width, snn_surrogate_width,
                 "rectangular surrogate half-width"),
      REAL_ENTRY("policy", snn_logit_gain, snn_logit_gain, "gain on population rates"),
      INT_ENTRY("policy", snn_window, snn_window, "LIF simulation steps per decision"),
      INT_ENTRY("policy", snn_population, snn_population, "neurons per action population"),

      STR_ENTRY("train", algo, algo, "tocm (imagination) | ippo (model-free baseline)"),
      INT_ENTRY("train", total_env_steps, total_env_steps, "environment step budget"),
      INT_ENTRY("train", episodes_per_iteration, episodes_per_iteration,
                "episodes collected per iteration"),
      INT_ENTRY("train", model_epochs, model_epochs, "model gradient steps per iteration"),
      INT_ENTRY("train", marl_epochs, marl_epochs, "imagination/PPO rounds per iteration"),
      INT_ENTRY("train", batch_size, batch_size, "episodes per model gradient step"),
      INT_ENTRY("train", imagination_horizon, imagination_horizon, "imagined steps per start"),
      INT_ENTRY("train", imagination_episodes, imagination_episodes,
                "episodes filtered for imagination starts per round"),
      INT_ENTRY("train", max_starts, max_starts, "cap on imagination starts per round"),
      INT_ENTRY("train", buffer_capacity, buffer_capacity, "replay capacity in episodes"),
      INT_ENTRY("train", seed, seed, "root seed; all randomness derives from it"),
      INT_ENTRY("train", checkpoint_every, checkpoint_every, "env steps between checkpoints"),
      INT_ENTRY("train", pretrain_model_steps, pretrain_model_steps,
                "model-only gradient steps before the joint loop"),
      INT_ENTRY("train", prefill_episodes, prefill_episodes,
                "episodes collected before the first iteration (0: batch_size)"),
      REAL_ENTRY("train", stop_at_obs_loss, stop_at_obs_loss,
                 "stop once the iteration mean observation loss falls below (0 = off)"),
  };
  return entries;
}

#undef INT_ENTRY
#undef REAL_ENTRY
#undef STR_ENTRY
#undef BOOL_ENTRY

const Entry* find_entry(const std::string& section, const std::string& key) {
  for (const auto& e : schema())
    if (section == e.section && key == e.key) return &e;
  return nullptr;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument("config: malformed section at line " + std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " + std::to_string(lineno));
    auto key = trim(t.substr(0, eq));
    auto value = trim(t.substr(eq + 1));
    const Entry* e = find_entry(section, key);
    if (!e)
      throw std::invalid_argument("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    e->set(base, value);
  }
  return base;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override: expected section.key=value, got '" + assignment + "'");
  auto key_path = trim(assignment.substr(0, eq));
  auto value = trim(assignment.substr(eq + 1));
  auto dot = key_path.find('.');
  if (dot == std::string::npos)
    throw std::invalid_argument("override: expected section.key=value, got '" + assignment + "'");
  const Entry* e = find_entry(key_path.substr(0, dot), key_path.substr(dot + 1));
  if (!e) throw std::invalid_argument("config: unknown key '" + key_path + "'");
  e->set(cfg, value);
}

std::string emit_config(const TrainConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& e : schema()) {
    if (section != e.section) {
      if (!section.empty()) out += "\n";
      section = e.section;
      out += "[" + section + "]\n";
    }
    out += std::string(e.key) + " = " + e.get(cfg) + "\n";
  }
  return out;
}

std::string config_reference() {
  TrainConfig defaults;
  std::string out = "# configuration reference (key = default  # description)\n";
  std::string section;
  for (const auto& e : schema()) {
    if (section != e.section) {
      section = e.section;
      out += "\n[" + section + "]\n";
    }
    std::string v = e.get(defaults);
    if (v.empty()) v = "<unset>";
    out += std::string(e.key) + " = " + v + "  # " + e.doc + "\n";
  }
  return out;
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.task.empty()) throw std::invalid_argument("config: missing required key 'env.task'");
  parse_task(cfg.task);
  if (cfg.algo != "tocm" && cfg.algo != "ippo")
    throw std::invalid_argument("config: train.algo must be tocm or ippo");
  if (cfg.actor != "dense" && cfg.actor != "spiking")
    throw std::invalid_argument("config: policy.actor must be dense or spiking");
  if (cfg.n_agents <= 0 || cfg.max_steps <= 0 || cfg.batch_size <= 0 ||
      cfg.episodes_per_iteration <= 0 || cfg.imagination_horizon <= 0 ||
      cfg.buffer_capacity <= 0 || cfg.total_env_steps <= 0)
    throw std::invalid_argument("config: counts and budgets must be positive");
  const EnvConfig env = make_env_config(cfg);
  if (env.obs_dim() > cfg.pad_obs)
    throw std::invalid_argument("config: model.pad_obs smaller than the task observation width");
  if (cfg.n_agents > cfg.pad_agents)
    throw std::invalid_argument("config: model.pad_agents smaller than env.n_agents");
  if (cfg.hidden % cfg.attn_tokens != 0)
    throw std::invalid_argument("config: model.hidden must be divisible by model.attn_tokens");
}

EnvConfig make_env_config(const TrainConfig& cfg) {
  EnvConfig env;
  env.task = parse_task(cfg.task.empty() ? "coop" : cfg.task);
  env.n_agents = cfg.n_agents;
  env.max_steps = cfg.max_steps;
  env.dt = float(cfg.dt);
  env.damping = float(cfg.damping);
  env.accel = float(cfg.accel);
  env.radius = float(cfg.radius);
  env.hetero_accel_large = float(cfg.hetero_accel_large);
  env.hetero_accel_small = float(cfg.hetero_accel_small);
  env.hetero_radius_large = float(cfg.hetero_radius_large);
  env.hetero_radius_small = float(cfg.hetero_radius_small);
  env.collision_penalty = float(cfg.collision_penalty);
  env.spawn_min = float(cfg.spawn_min);
  env.spawn_max = float(cfg.spawn_max);
  return env;
}

ModelDims make_model_dims(const TrainConfig& cfg) {
  ModelDims dims;
  dims.det = cfg.det;
  dims.stoch = cfg.stoch;
  dims.mental = cfg.mental;
  dims.hidden = cfg.hidden;
  dims.attn_tokens = cfg.attn_tokens;
  dims.pad_obs = cfg.pad_obs;
  dims.pad_agents = cfg.pad_agents;
  dims.min_std = float(cfg.min_std);
  dims.free_nats = float(cfg.free_nats);
  return dims;
}

PolicyConfig make_policy_config(const TrainConfig& cfg) {
  PolicyConfig p;
  p.input_dim = 2 * cfg.pad_obs + 1 + cfg.pad_agents;
  p.hidden = cfg.policy_hidden;
  p.lr = float(cfg.policy_lr);
  p.critic_lr = float(cfg.critic_lr);
  p.grad_clip = float(cfg.policy_grad_clip);
  p.clip_eps = float(cfg.clip_eps);
  p.value_coef = float(cfg.value_coef);
  p.entropy_coef = float(cfg.entropy_coef);
  p.discount = float(cfg.discount);
  p.gae_lambda = float(cfg.gae_lambda);
  p.ppo_passes = cfg.ppo_passes;
  p.actor_kind = cfg.actor;
  p.snn_decay = float(cfg.snn_decay);
  p.snn_threshold = float(cfg.snn_threshold);
  p.snn_surrogate_width = float(cfg.snn_surrogate_width);
  p.snn_logit_gain = float(cfg.snn_logit_gain);
  p.snn_window = cfg.snn_window;
  p.snn_population = cfg.snn_population;
  return p;
}

}  // namespace tocm
