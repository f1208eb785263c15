#pragma once

// Run configuration: flat key = value text with [env] / [model] / [policy] /
// [train] sections. Every key has a documented default; the effective
// configuration can be emitted byte-identically for run snapshots.

#include <string>
#include <vector>

#include "tocm/env.hpp"
#include "tocm/policy.hpp"
#include "tocm/world_model.hpp"

namespace tocm {

struct TrainConfig {
  // [env]
  std::string task;  // required: coop | hetero
  int n_agents = 3;
  int max_steps = 25;
  double dt = 0.1;
  double damping = 0.75;
  double accel = 3.0;
  double radius = 0.1;
  double hetero_accel_large = 3.0;
  double hetero_accel_small = 4.0;
  double hetero_radius_large = 0.15;
  double hetero_radius_small = 0.05;
  double collision_penalty = 1.0;
  double spawn_min = -1.0;
  double spawn_max = 1.0;
  bool export_traces = false;

  // [model]
  int det = 128;
  int stoch = 32;
  int mental = 64;
  int hidden = 128;
  int attn_tokens = 4;
  int pad_obs = 18;
  int pad_agents = 4;
  double min_std = 0.1;
  double free_nats = 1.0;
  double model_lr = 3e-4;
  double model_grad_clip = 100.0;

  // [policy]
  int policy_hidden = 128;
  int ppo_passes = 4;
  double policy_lr = 3e-4;
  double critic_lr = 1e-3;
  double policy_grad_clip = 10.0;
  double clip_eps = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double discount = 0.99;
  double gae_lambda = 0.95;
  std::string actor = "dense";  // dense | spiking
  double snn_decay = 0.5;
  double snn_threshold = 1.0;
  double snn_surrogate_width = 0.5;
  double snn_logit_gain = 10.0;
  int snn_window = 8;
  int snn_population = 16;

  // [train]
  std::string algo = "tocm";  // tocm | ippo
  long long total_env_steps = 300000;
  int episodes_per_iteration = 10;
  int model_epochs = 20;
  int marl_epochs = 4;
  int batch_size = 16;
  int imagination_horizon = 15;
  int imagination_episodes = 4;
  int max_starts = 512;
  int buffer_capacity = 5000;
  long long seed = 1;
  long long checkpoint_every = 10000;
  int pretrain_model_steps = 0;
  int prefill_episodes = 0;  // 0: use batch_size
  double stop_at_obs_loss = 0.0;  // 0 disables early stop
};

// Parse a config file; keys outside the schema raise an error naming them.
TrainConfig load_config(const std::string& path);
TrainConfig parse_config_text(const std::string& text, TrainConfig base = {});

// "section.key=value" override, same validation as the file path.
void apply_override(TrainConfig& cfg, const std::string& assignment);

// Canonical emission: fixed ordering, shortest round-trip numerals.
std::string emit_config(const TrainConfig& cfg);

// Generated reference: every key with its default and documentation line.
std::string config_reference();

// Throws when required keys are missing or values are inconsistent.
void validate_config(const TrainConfig& cfg);

EnvConfig make_env_config(const TrainConfig& cfg);
ModelDims make_model_dims(const TrainConfig& cfg);
PolicyConfig make_policy_config(const TrainConfig& cfg);

}  // namespace tocm
