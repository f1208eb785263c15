#pragma once

// Training orchestration: collect real episodes, fit the world model, train
// the policies inside the model's imagination, write metrics and
// checkpoints. A model-free variant (algo = ippo) trains the same policy on
// the real episodes with the prediction inputs zeroed.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tocm/checkpoint.hpp"
#include "tocm/config.hpp"
#include "tocm/env.hpp"
#include "tocm/policy.hpp"
#include "tocm/replay.hpp"
#include "tocm/world_model.hpp"

namespace tocm {

struct IterationMetrics {
  long long env_steps = 0;
  int iteration = 0;
  double episode_reward_mean = 0;
  double obs_loss = 0, rew_loss = 0, act_loss = 0, kl_loss = 0, total_model_loss = 0;
  double policy_loss = 0, value_loss = 0, entropy = 0, clip_fraction = 0;
  long long buffer_episodes = 0;
  int transferred = 0;
};

extern const char* kMetricsHeader;
std::string metrics_csv_row(const IterationMetrics& m);

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  // Appends n complete episodes to the buffer; returns their mean total
  // reward. Before the first model update, prediction inputs are zero.
  float collect_episodes(int n);

  // One pass of the training loop: collect, model epochs, imagination/PPO
  // rounds. Requires the buffer to hold at least batch_size episodes after
  // collection.
  IterationMetrics train_iteration();

  // Model-only gradient steps on the current buffer (pretraining flag).
  void pretrain_model(int gradient_steps);

  struct TransferReport {
    std::vector<std::string> transferred;
    std::vector<std::string> reinitialized;
  };
  // Loads the dimension-independent predictor core (advance + prior head)
  // from a source checkpoint; same_task additionally restores encoder,
  // posterior and decoders. Marks the run as transferred in metrics.
  TransferReport transfer_load(const CheckpointData& source, bool same_task);

  CheckpointData checkpoint() const;
  void restore(const CheckpointData& data);

  // Evaluation episodes without learning; returns per-episode total rewards.
  std::vector<float> evaluate(int episodes, bool greedy, uint64_t seed);

  // One real episode rolled with the current policy, for prediction export.
  Episode rollout_episode(uint64_t seed);

  WorldModel& world_model() { return *wm_; }
  Policy& policy() { return *policy_; }
  ReplayBuffer& buffer() { return buffer_; }
  const TrainConfig& config() const { return cfg_; }
  long long env_steps() const { return env_steps_; }
  int iteration() const { return iteration_; }
  long long model_gradient_steps() const { return model_grad_steps_; }
  bool model_trained() const { return model_trained_; }
  bool obs_loss_target_reached() const { return obs_target_reached_; }
  void set_trace_dir(std::string dir) { trace_dir_ = std::move(dir); }

 private:
  struct FilterState {
    Tensor h, z;
    std::vector<int> prev_action;
  };

  void filter_init(FilterState& fs, const std::vector<std::vector<float>>& obs, Rng& noise);
  void filter_step(FilterState& fs, const std::vector<int>& action,
                   const std::vector<std::vector<float>>& obs, Rng& noise);
  // ô_{t+1}, r̂_{t+1} obtained by advancing with the previous action.
  void predict_for_policy(const FilterState& fs, std::vector<std::vector<float>>& pred_obs,
                          std::vector<float>& pred_rew);
  std::vector<ImaginationStart> gather_starts();
  PpoBatch batch_from_rollout(const ImaginedRollout& roll);
  PpoBatch batch_from_collection();

  // Inputs/actions/log-probabilities exactly as seen while collecting the
  // current iteration's episodes; the model-free baseline trains on these.
  struct CollectionBuffer {
    int episodes = 0, steps = 0, n_agents = 0, input_dim = 0;
    std::vector<float> inputs;  // (episodes*steps*agents) x input_dim
    std::vector<int> actions;
    std::vector<float> logp;
    std::vector<float> rewards;  // episodes*steps, shared
  };

  TrainConfig cfg_;
  EnvConfig env_cfg_;
  ModelDims dims_;
  PolicyConfig pol_cfg_;
  ParticleEnv env_;
  std::unique_ptr<WorldModel> wm_;
  std::unique_ptr<Policy> policy_;
  std::unique_ptr<AdamT<float>> model_opt_;
  ReplayBuffer buffer_;

  Rng env_seed_rng_, collect_rng_, filter_noise_rng_, model_noise_rng_, batch_rng_,
      imagine_rng_, start_rng_;
  long long env_steps_ = 0;
  int iteration_ = 0;
  long long model_grad_steps_ = 0;
  bool model_trained_ = false;
  bool obs_target_reached_ = false;
  int transferred_flag_ = 0;
  std::string trace_dir_;
  CollectionBuffer last_collect_;
  // Envelope of per-step rewards seen in the real environment; imagined
  // rewards are clamped into it so decoder extrapolations cannot blow up
  // the value targets.
  float reward_low_ = 0.0f, reward_high_ = 0.0f;
  bool reward_range_seen_ = false;
};

// --- run artifacts ---

class RunArtifacts {
 public:
  explicit RunArtifacts(std::string dir);
  const std::string& dir() const { return dir_; }
  std::string config_path() const { return dir_ + "/config.cfg"; }
  std::string metrics_path() const { return dir_ + "/metrics.csv"; }
  std::string checkpoint_path(long long env_steps) const;
  std::string final_checkpoint_path() const { return dir_ + "/final.tocm"; }
  std::string transfer_log_path() const { return dir_ + "/transfer_log.txt"; }

  void write_config(const TrainConfig& cfg);
  void append_metrics(const IterationMetrics& m);

 private:
  std::string dir_;
  bool header_written_ = false;
};

struct RunResult {
  long long env_steps = 0;
  int iterations = 0;
  double final_reward_mean = 0;
};

// Full training run: prefill, optional pretraining, iterate until the step
// budget (or the observation-loss stop), checkpointing along the way.
RunResult run_training(const TrainConfig& cfg, RunArtifacts& artifacts,
                       const std::optional<std::string>& transfer_source = std::nullopt,
                       const std::function<void(const IterationMetrics&)>& on_iteration = {});

}  // namespace tocm
