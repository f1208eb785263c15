#include "tocm/env.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace tocm {

Task parse_task(const std::string& name) {
  if (name == "coop") return Task::kCoop;
  if (name == "hetero") return Task::kHetero;
  throw std::invalid_argument("unknown task '" + name + "' (expected coop or hetero)");
}

std::string task_name(Task task) { return task == Task::kCoop ? "coop" : "hetero"; }

ParticleEnv::ParticleEnv(EnvConfig cfg) : cfg_(cfg) {
  const int n = cfg_.n_agents;
  if (cfg_.task == Task::kCoop) {
    // 1 is a degenerate variant kept for tests; the task itself uses 2..4.
    if (n < 1 || n > 4)
      throw std::invalid_argument("coop: invalid agent count " + std::to_string(n));
  } else {
    if (n != 2 && n != 4)
      throw std::invalid_argument("hetero: invalid agent count " + std::to_string(n));
  }
}

std::vector<std::vector<float>> ParticleEnv::reset(uint64_t seed) {
  const int n = cfg_.n_agents;
  state_ = EnvState{};
  state_.max_steps = cfg_.max_steps;
  state_.agent_pos.resize(size_t(n) * 2);
  state_.agent_vel.assign(size_t(n) * 2, 0.0f);
  state_.landmark_pos.resize(size_t(n) * 2);
  state_.agent_radius.resize(n);
  state_.agent_accel.resize(n);

  Rng rng(seed, "env-reset");
  for (auto& x : state_.agent_pos) x = float(rng.uniform(cfg_.spawn_min, cfg_.spawn_max));
  for (auto& x : state_.landmark_pos) x = float(rng.uniform(cfg_.spawn_min, cfg_.spawn_max));

  for (int i = 0; i < n; ++i) {
    if (cfg_.task == Task::kHetero) {
      const bool large = i < n / 2;  // first half: slow and large
      state_.agent_radius[i] = large ? cfg_.hetero_radius_large : cfg_.hetero_radius_small;
      state_.agent_accel[i] = large ? cfg_.hetero_accel_large : cfg_.hetero_accel_small;
    } else {
      state_.agent_radius[i] = cfg_.radius;
      state_.agent_accel[i] = cfg_.accel;
    }
  }
  ready_ = true;

  std::vector<std::vector<float>> obs;
  for (int i = 0; i < n; ++i) obs.push_back(build_observation(i));
  return obs;
}

StepResult ParticleEnv::step(const JointAction& action) {
  const int n = cfg_.n_agents;
  if (!ready_) throw std::runtime_error("step: reset the environment first");
  if (done()) throw std::runtime_error("step: episode already finished");
  if (int(action.size()) != n)
    throw std::invalid_argument("step: expected " + std::to_string(n) + " actions, got " +
                                std::to_string(action.size()));

  static constexpr float kDir[kNumActions][2] = {
      {0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};

  for (int i = 0; i < n; ++i) {
    const int a = action[i];
    if (a < 0 || a >= kNumActions)
      throw std::invalid_argument("step: action out of range: " + std::to_string(a));
    for (int d = 0; d < 2; ++d) {
      float& vel = state_.agent_vel[size_t(i) * 2 + d];
      vel = vel * cfg_.damping + state_.agent_accel[i] * kDir[a][d] * cfg_.dt;
      state_.agent_pos[size_t(i) * 2 + d] += vel * cfg_.dt;
    }
  }
  ++state_.step_count;

  StepResult result;
  result.reward = compute_reward();
  result.done = done();
  for (int i = 0; i < n; ++i) result.observations.push_back(build_observation(i));
  return result;
}

float ParticleEnv::compute_reward() const {
  const int n = cfg_.n_agents;
  double reward = 0.0;
  for (int l = 0; l < n; ++l) {
    double best = 1e30;
    for (int i = 0; i < n; ++i) {
      const double dx = state_.agent_pos[size_t(i) * 2] - state_.landmark_pos[size_t(l) * 2];
      const double dy = state_.agent_pos[size_t(i) * 2 + 1] - state_.landmark_pos[size_t(l) * 2 + 1];
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    reward -= best;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = state_.agent_pos[size_t(i) * 2] - state_.agent_pos[size_t(j) * 2];
      const double dy = state_.agent_pos[size_t(i) * 2 + 1] - state_.agent_pos[size_t(j) * 2 + 1];
      const double touch = state_.agent_radius[i] + state_.agent_radius[j];
      if (dx * dx + dy * dy < touch * touch) reward -= cfg_.collision_penalty;
    }
  return float(reward);
}

std::vector<float> ParticleEnv::build_observation(int agent_idx) const {
  const int n = cfg_.n_agents;
  if (agent_idx < 0 || agent_idx >= n)
    throw std::invalid_argument("build_observation: bad agent index");

  std::vector<float> obs;
  obs.reserve(cfg_.obs_dim());
  const float px = state_.agent_pos[size_t(agent_idx) * 2];
  const float py = state_.agent_pos[size_t(agent_idx) * 2 + 1];
  obs.push_back(state_.agent_vel[size_t(agent_idx) * 2]);
  obs.push_back(state_.agent_vel[size_t(agent_idx) * 2 + 1]);
  obs.push_back(px);
  obs.push_back(py);
  for (int l = 0; l < n; ++l) {
    obs.push_back(state_.landmark_pos[size_t(l) * 2] - px);
    obs.push_back(state_.landmark_pos[size_t(l) * 2 + 1] - py);
  }
  for (int i = 0; i < n; ++i) {
    if (i == agent_idx) continue;
    obs.push_back(state_.agent_pos[size_t(i) * 2] - px);
    obs.push_back(state_.agent_pos[size_t(i) * 2 + 1] - py);
  }
  return obs;
}

void EpisodeTrace::record(const EnvState& state, const JointAction& action, float reward) {
  const int n = int(action.size());
  for (int i = 0; i < n; ++i)
    rows.push_back({state.step_count, i, action[i], state.agent_pos[size_t(i) * 2],
                    state.agent_pos[size_t(i) * 2 + 1], state.agent_vel[size_t(i) * 2],
                    state.agent_vel[size_t(i) * 2 + 1], reward});
}

void EpisodeTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << "step,agent,pos_x,pos_y,vel_x,vel_y,action,reward\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.agent << ',' << r.pos_x << ',' << r.pos_y << ',' << r.vel_x << ','
        << r.vel_y << ',' << r.action << ',' << r.reward << '\n';
}

}  // namespace tocm
