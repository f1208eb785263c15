#pragma once

// Episode storage. Only complete fixed-length episodes enter the buffer;
// eviction is oldest-first once capacity is reached.

#include <span>
#include <stdexcept>
#include <vector>

#include "tocm/rng.hpp"
#include "tocm/world_model.hpp"

namespace tocm {

struct Episode {
  int n_agents = 0;
  int steps = 0;  // transitions; observations cover steps + 1 indices
  int d_obs = 0;
  std::vector<float> obs;      // (steps+1) x n_agents x d_obs
  std::vector<int> actions;    // steps x n_agents
  std::vector<float> rewards;  // steps (shared)

  std::span<const float> obs_at(int t, int agent) const {
    return {obs.data() + (size_t(t) * n_agents + agent) * d_obs, size_t(d_obs)};
  }
  std::vector<std::vector<float>> obs_rows(int t) const {
    std::vector<std::vector<float>> rows;
    for (int i = 0; i < n_agents; ++i) {
      auto s = obs_at(t, i);
      rows.emplace_back(s.begin(), s.end());
    }
    return rows;
  }
  std::vector<int> joint_action(int t) const {
    return {actions.begin() + size_t(t) * n_agents, actions.begin() + size_t(t + 1) * n_agents};
  }
  float total_reward() const {
    float acc = 0;
    for (float r : rewards) acc += r;
    return acc;
  }
  bool complete() const {
    return steps > 0 && int64_t(obs.size()) == int64_t(steps + 1) * n_agents * d_obs &&
           int64_t(actions.size()) == int64_t(steps) * n_agents &&
           int64_t(rewards.size()) == steps;
  }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity, int expected_steps = 25)
      : capacity_(capacity), expected_steps_(expected_steps) {
    if (capacity <= 0) throw std::invalid_argument("replay: capacity must be positive");
  }

  void add(Episode e) {
    if (!e.complete() || e.steps != expected_steps_)
      throw std::invalid_argument("replay: only complete " + std::to_string(expected_steps_) +
                                  "-step episodes are stored");
    if (int(slots_.size()) < capacity_) {
      slots_.push_back(std::move(e));
    } else {
      slots_[head_] = std::move(e);
      head_ = (head_ + 1) % capacity_;
    }
    ++total_added_;
  }

  size_t size() const { return slots_.size(); }
  int capacity() const { return capacity_; }
  int64_t total_added() const { return total_added_; }

  // Logical index 0 is the oldest stored episode.
  const Episode& at(size_t i) const {
    if (i >= slots_.size()) throw std::out_of_range("replay: index out of range");
    return slots_[(head_ + i) % slots_.size()];
  }

  const Episode& sample(Rng& rng) const {
    if (slots_.empty()) throw std::runtime_error("replay: buffer empty");
    return at(size_t(rng.uniform_int(int(slots_.size()))));
  }

 private:
  int capacity_;
  int expected_steps_;
  size_t head_ = 0;
  int64_t total_added_ = 0;
  std::vector<Episode> slots_;
};

// Flattens episodes (equal agents/width/length) into the padded per-timestep
// tensors the model loss consumes. Row order: episode-major, agent-minor.
inline SequenceBatch build_sequence_batch(std::span<const Episode* const> episodes,
                                          const ModelDims& dims) {
  if (episodes.empty()) throw std::invalid_argument("sequence batch: no episodes");
  const Episode& first = *episodes[0];
  for (const Episode* e : episodes) {
    if (!e->complete()) throw std::invalid_argument("sequence batch: incomplete episode");
    if (e->n_agents != first.n_agents || e->d_obs != first.d_obs || e->steps != first.steps)
      throw std::invalid_argument("sequence batch: episodes disagree on shape");
  }

  const int n = first.n_agents, d = first.d_obs, T = first.steps;
  const int b = int(episodes.size());
  const int rows = b * n;

  SequenceBatch batch;
  batch.rows = rows;
  batch.steps = T;
  batch.n_agents = n;
  batch.d_obs = d;

  for (int t = 0; t <= T; ++t) {
    std::vector<float> oid(size_t(rows) * dims.enc_in(), 0.0f);
    std::vector<float> target(size_t(rows) * d);
    for (int e = 0; e < b; ++e)
      for (int i = 0; i < n; ++i) {
        const size_t r = size_t(e) * n + i;
        auto o = episodes[e]->obs_at(t, i);
        float* dst = oid.data() + r * dims.enc_in();
        for (int j = 0; j < d; ++j) dst[j] = o[j];
        dst[dims.pad_obs + i] = 1.0f;
        std::copy(o.begin(), o.end(), target.data() + r * d);
      }
    batch.obs_id.push_back(Tensor::from({rows, dims.enc_in()}, std::move(oid)));
    batch.obs_target.push_back(Tensor::from({rows, d}, std::move(target)));
  }

  for (int t = 0; t < T; ++t) {
    std::vector<float> joint(size_t(rows) * dims.act_dim(), 0.0f);
    std::vector<float> act_target(size_t(rows) * n * kNumActions, 0.0f);
    std::vector<float> rew(size_t(rows), 0.0f);
    for (int e = 0; e < b; ++e) {
      auto row = make_joint_action(dims, episodes[e]->joint_action(t));
      for (int i = 0; i < n; ++i) {
        const size_t r = size_t(e) * n + i;
        std::copy(row.begin(), row.end(), joint.data() + r * dims.act_dim());
        std::copy(row.begin(), row.begin() + size_t(n) * kNumActions,
                  act_target.data() + r * n * kNumActions);
        rew[r] = episodes[e]->rewards[t];
      }
    }
    batch.act_joint.push_back(Tensor::from({rows, dims.act_dim()}, std::move(joint)));
    batch.act_target.push_back(Tensor::from({rows, n * kNumActions}, std::move(act_target)));
    batch.rew_target.push_back(Tensor::from({rows, 1}, std::move(rew)));
  }
  return batch;
}

}  // namespace tocm
