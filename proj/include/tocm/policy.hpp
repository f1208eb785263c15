#pragma once

// Independent PPO actor-critic. One parameter set is shared by all agents;
// the one-hot identity inside the policy input conditions it per agent. The
// actor consumes the current observation plus the world model's one-step
// prediction; a model-free baseline runs the same network with the
// prediction fields zeroed.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tocm/nn.hpp"
#include "tocm/rng.hpp"
#include "tocm/tensor.hpp"

namespace tocm {

struct PolicyConfig {
  int input_dim = 41;
  int hidden = 128;
  float lr = 3e-4f;
  float critic_lr = 1e-3f;
  float grad_clip = 10.0f;
  float clip_eps = 0.2f;
  float value_coef = 0.5f;
  float entropy_coef = 0.01f;
  float discount = 0.99f;
  float gae_lambda = 0.95f;
  int ppo_passes = 4;
  std::string actor_kind = "dense";  // dense | spiking

  // leaky integrate-and-fire actor
  float snn_decay = 0.5f;
  float snn_threshold = 1.0f;
  float snn_surrogate_width = 0.5f;
  int snn_window = 8;
  int snn_population = 16;
  float snn_logit_gain = 10.0f;
};

class ActorNet {
 public:
  virtual ~ActorNet() = default;
  virtual Tensor logits(const Tensor& inputs) = 0;  // [rows, input_dim] -> [rows, 5]
  virtual ParamStore& params() = 0;
  virtual const ParamStore& params() const = 0;
};

std::unique_ptr<ActorNet> make_actor(const PolicyConfig& cfg, uint64_t seed);

struct ActResult {
  int action = 0;
  float logp = 0.0f;
  float entropy = 0.0f;
};

struct GaeResult {
  std::vector<float> advantages;
  std::vector<float> value_targets;
};

// Generalized advantage estimation, backward recursion over one trajectory.
// values carries T+1 entries (bootstrap last).
GaeResult gae(std::span<const float> rewards, std::span<const float> values, float discount,
              float lambda);

struct PpoBatch {
  std::string source;  // provenance: "imagined" or "real"
  int rows = 0;
  int input_dim = 0;
  std::vector<float> inputs;         // rows x input_dim
  std::vector<int> actions;          // rows
  std::vector<float> old_logp;       // rows, behavior policy log-probabilities
  std::vector<float> advantages;     // rows, normalized inside the update
  std::vector<float> value_targets;  // rows
};

struct PpoStats {
  float actor_loss = 0;
  float critic_loss = 0;
  float entropy = 0;
  float clip_fraction = 0;
};

class Policy {
 public:
  Policy(const PolicyConfig& cfg, uint64_t seed);

  const PolicyConfig& config() const { return cfg_; }

  ActResult act(std::span<const float> input, bool greedy, Rng& rng);
  float value(std::span<const float> input);

  // Batched forwards used by imagination and evaluation.
  void act_batch(const std::vector<float>& inputs, int rows, bool greedy, Rng& rng,
                 std::vector<int>& actions, std::vector<float>& logp, std::vector<float>& values);
  void value_batch(const std::vector<float>& inputs, int rows, std::vector<float>& values);

  // Clipped-surrogate update; runs cfg.ppo_passes passes, then freezes the
  // old-policy snapshot to the updated parameters.
  PpoStats ppo_update(const PpoBatch& batch);

  ActorNet& actor() { return *actor_; }
  ActorNet& behavior() { return *old_actor_; }
  ParamStore& actor_params() { return actor_->params(); }
  ParamStore& critic_params() { return critic_store_; }
  void sync_old();
  void reseed_optimizers();

 private:
  Tensor critic_forward(const Tensor& x);

  PolicyConfig cfg_;
  std::unique_ptr<ActorNet> actor_, old_actor_;
  ParamStore critic_store_;
  Mlp2T<float> critic_trunk_;
  Tensor critic_w3_, critic_b3_;
  std::unique_ptr<Adam> actor_opt_, critic_opt_;
};

}  // namespace tocm
