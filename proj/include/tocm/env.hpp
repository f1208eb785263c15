#pragma once

// Deterministic 2-D particle world: cooperative navigation and heterogeneous
// navigation with a shared team reward. N agents must cover N landmarks; the
// per-step reward is the negative sum over landmarks of the closest agent's
// distance, minus a penalty per overlapping agent pair.

#include <cstdint>
#include <string>
#include <vector>

#include "tocm/rng.hpp"

namespace tocm {

enum class Task { kCoop, kHetero };

Task parse_task(const std::string& name);
std::string task_name(Task task);

struct EnvConfig {
  Task task = Task::kCoop;
  int n_agents = 3;
  int max_steps = 25;
  float dt = 0.1f;
  float damping = 0.75f;
  float accel = 3.0f;
  float radius = 0.1f;
  float hetero_accel_large = 3.0f;
  float hetero_accel_small = 4.0f;
  float hetero_radius_large = 0.15f;
  float hetero_radius_small = 0.05f;
  float collision_penalty = 1.0f;
  float spawn_min = -1.0f;
  float spawn_max = 1.0f;

  // [self_vel, self_pos, landmarks - self, others - self]
  int obs_dim() const { return 4 + 2 * n_agents + 2 * (n_agents - 1); }
};

struct EnvState {
  std::vector<float> agent_pos;     // N x 2
  std::vector<float> agent_vel;     // N x 2
  std::vector<float> landmark_pos;  // N x 2 (one landmark per agent)
  std::vector<float> agent_radius;  // N
  std::vector<float> agent_accel;   // N
  int step_count = 0;
  int max_steps = 25;
};

using JointAction = std::vector<int>;  // per-agent index in {0..4}

inline constexpr int kNumActions = 5;
inline constexpr int kActionNone = 0;

struct StepResult {
  std::vector<std::vector<float>> observations;  // per agent
  float reward = 0.0f;  // shared: identical for every agent
  bool done = false;
};

class ParticleEnv {
 public:
  explicit ParticleEnv(EnvConfig cfg);

  std::vector<std::vector<float>> reset(uint64_t seed);
  StepResult step(const JointAction& action);
  std::vector<float> build_observation(int agent_idx) const;
  float compute_reward() const;

  bool done() const { return state_.step_count >= state_.max_steps; }
  const EnvState& state() const { return state_; }
  EnvState& state_mut() { return state_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  EnvConfig cfg_;
  EnvState state_;
  bool ready_ = false;
};

// Per-step trajectory recording, one CSV per episode.
struct EpisodeTrace {
  struct Row {
    int step, agent, action;
    float pos_x, pos_y, vel_x, vel_y, reward;
  };
  std::vector<Row> rows;

  void record(const EnvState& state, const JointAction& action, float reward);
  void write_csv(const std::string& path) const;
};

}  // namespace tocm
