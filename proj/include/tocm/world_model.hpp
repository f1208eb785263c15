#pragma once

// The shared ToCM world model. One parameter set serves every agent: an
// observation (with the agent's one-hot identity) is encoded into a mental
// state, a posterior head produces the stochastic latent from (h, s), a prior
// head predicts it from h alone, and the predictor advances h through
// MLP -> attention -> gated recurrent cell conditioned on the joint action.
// Decoders reconstruct observations, the shared reward and the joint action.
//
// Observations and joint actions are zero-padded to fixed task-family sizes,
// so the parameter count does not change with the number of agents.

#include <string>
#include <vector>

#include "tocm/env.hpp"
#include "tocm/nn.hpp"
#include "tocm/rng.hpp"
#include "tocm/tensor.hpp"

namespace tocm {

struct ModelDims {
  int det = 128;    // deterministic state h
  int stoch = 32;   // stochastic state z
  int mental = 64;  // mental state s
  int hidden = 128;
  int pad_obs = 18;
  int pad_agents = 4;
  int attn_tokens = 4;
  float min_std = 0.1f;
  float free_nats = 1.0f;

  int enc_in() const { return pad_obs + pad_agents; }
  int act_dim() const { return pad_agents * kNumActions; }
  int token_dim() const { return hidden / attn_tokens; }
};

template <typename T>
struct LatentStateT {
  TensorT<T> h;  // [rows, det]
  TensorT<T> z;  // [rows, stoch]
  GaussianParamsT<T> z_params;
};

using LatentState = LatentStateT<float>;

// Everything one loss pass needs, already padded and flattened to
// rows = episodes x agents. obs/ids cover T+1 timesteps, actions and rewards
// cover the T transitions between them.
template <typename T>
struct SequenceBatchT {
  int rows = 0;
  int steps = 0;     // T
  int n_agents = 0;  // real agents (loss slices ignore padded slots)
  int d_obs = 0;     // real observation width
  std::vector<TensorT<T>> obs_id;      // T+1 x [rows, enc_in]
  std::vector<TensorT<T>> obs_target;  // T+1 x [rows, d_obs]
  std::vector<TensorT<T>> act_joint;   // T x [rows, act_dim]
  std::vector<TensorT<T>> act_target;  // T x [rows, n_agents*5]
  std::vector<TensorT<T>> rew_target;  // T x [rows, 1]
};

using SequenceBatch = SequenceBatchT<float>;

template <typename T>
struct ModelLossT {
  TensorT<T> total;  // graph root for backward
  T act = 0, obs = 0, rew = 0, kl = 0;
  T total_value = 0;
};

template <typename T>
class WorldModelT {
 public:
  WorldModelT(const ModelDims& dims, uint64_t seed) : dims_(dims) {
    if (dims.hidden % dims.attn_tokens != 0)
      throw std::invalid_argument("model: hidden width must divide into attention tokens");
    Rng rng(seed, "init/world-model");
    enc_ = Mlp2T<T>::create(store_, "wm/enc", dims.enc_in(), dims.hidden, dims.mental, rng);
    post_ = Mlp2T<T>::create(store_, "wm/post", dims.det + dims.mental, dims.hidden,
                             2 * dims.stoch, rng);
    prior_ = Mlp2T<T>::create(store_, "wm/prior", dims.det, dims.hidden, 2 * dims.stoch, rng);
    adv_w_ = store_.add("wm/adv/w", init_linear<T>(rng, dims.stoch + dims.act_dim(), dims.hidden));
    adv_b_ = store_.add("wm/adv/b", init_zeros_row<T>(dims.hidden));
    attn_q_ = store_.add("wm/adv/attn_q", init_linear<T>(rng, dims.det, dims.token_dim()));
    attn_k_ = store_.add("wm/adv/attn_k", init_linear<T>(rng, dims.token_dim(), dims.token_dim()));
    attn_v_ = store_.add("wm/adv/attn_v", init_linear<T>(rng, dims.token_dim(), dims.hidden));
    gru_ = GruParamsT<T>::create(store_, "wm/adv/gru", dims.hidden, dims.det, rng);
    dec_obs_ = Mlp2T<T>::create(store_, "wm/dec_obs", dims.det + dims.stoch, dims.hidden,
                                dims.pad_obs, rng);
    dec_rew_ = Mlp2T<T>::create(store_, "wm/dec_rew", dims.det + dims.stoch, dims.hidden, 1, rng);
    dec_act_ = Mlp2T<T>::create(store_, "wm/dec_act", dims.det + dims.stoch, dims.hidden,
                                dims.act_dim(), rng);
  }

  const ModelDims& dims() const { return dims_; }
  ParamStoreT<T>& params() { return store_; }
  const ParamStoreT<T>& params() const { return store_; }

  // [rows, enc_in] -> [rows, mental]
  TensorT<T> encode(const TensorT<T>& obs_id) const {
    if (obs_id.cols() != dims_.enc_in())
      throw std::invalid_argument("encode: expected width " + std::to_string(dims_.enc_in()) +
                                  ", got " + shape_str(obs_id.shape()));
    return enc_(obs_id);
  }

  GaussianParamsT<T> posterior(const TensorT<T>& h, const TensorT<T>& s) const {
    return to_gaussian(post_(concat_cols<T>({h, s})));
  }

  GaussianParamsT<T> prior(const TensorT<T>& h) const { return to_gaussian(prior_(h)); }

  // Next deterministic state from (h, z, joint one-hot action).
  TensorT<T> advance(const TensorT<T>& h, const TensorT<T>& z, const TensorT<T>& action) const {
    if (action.cols() != dims_.act_dim())
      throw std::invalid_argument("advance: expected joint action width " +
                                  std::to_string(dims_.act_dim()) + ", got " +
                                  shape_str(action.shape()));
    auto features = elu_t(affine(concat_cols<T>({z, action}), adv_w_, adv_b_));
    // The previous hidden state queries token groups of the new features.
    const int td = dims_.token_dim();
    auto q = matmul(h, attn_q_);
    std::vector<TensorT<T>> scores;
    std::vector<TensorT<T>> values;
    for (int t = 0; t < dims_.attn_tokens; ++t) {
      auto tok = slice_cols(features, t * td, (t + 1) * td);
      auto key = matmul(tok, attn_k_);
      values.push_back(matmul(tok, attn_v_));
      scores.push_back(scale(rowsum(mul(q, key)), T(1) / std::sqrt(T(td))));
    }
    auto weights = softmax_rows(concat_cols<T>(std::span<const TensorT<T>>(scores)));
    TensorT<T> mixed;
    for (int t = 0; t < dims_.attn_tokens; ++t) {
      auto part = mul_colvec(values[t], slice_cols(weights, t, t + 1));
      mixed = t == 0 ? part : add(mixed, part);
    }
    return gru_cell(mixed, h, gru_);
  }

  TensorT<T> decode_obs(const TensorT<T>& h, const TensorT<T>& z) const {
    return dec_obs_(concat_cols<T>({h, z}));
  }

  TensorT<T> decode_reward(const TensorT<T>& h, const TensorT<T>& z) const {
    return dec_rew_(concat_cols<T>({h, z}));
  }

  // Per-agent-slot softmax rows over the padded joint action layout.
  TensorT<T> decode_action(const TensorT<T>& h, const TensorT<T>& z) const {
    auto logits = dec_act_(concat_cols<T>({h, z}));
    std::vector<TensorT<T>> blocks;
    for (int slot = 0; slot < dims_.pad_agents; ++slot)
      blocks.push_back(
          softmax_rows(slice_cols(logits, slot * kNumActions, (slot + 1) * kNumActions)));
    return concat_cols<T>(std::span<const TensorT<T>>(blocks));
  }

  // Unrolls the full sequence: posterior filtering with reconstruction,
  // reward and action terms plus the per-step KL between posterior and prior
  // (free nats subtracted, clamped at zero).
  ModelLossT<T> model_loss(const SequenceBatchT<T>& batch, Rng& noise_rng) const {
    if (batch.steps < 1 || int(batch.obs_id.size()) != batch.steps + 1 ||
        int(batch.act_joint.size()) != batch.steps)
      throw std::invalid_argument("model_loss: incomplete episode batch");

    auto h = TensorT<T>::zeros({batch.rows, dims_.det});
    TensorT<T> l_obs, l_act, l_rew, l_kl;
    auto accumulate = [](TensorT<T>& acc, TensorT<T> term) {
      acc = acc.defined() ? add(acc, term) : term;
    };

    TensorT<T> z;
    for (int t = 0; t <= batch.steps; ++t) {
      if (t > 0) h = advance(h, z, batch.act_joint[t - 1]);
      auto s = encode(batch.obs_id[t]);
      auto post = posterior(h, s);
      auto pri = prior(h);
      accumulate(l_kl, relu_t(add_const(gaussian_kl(post, pri), -T(dims_.free_nats))));
      z = sample_gaussian(post, normal_noise(batch.rows, dims_.stoch, noise_rng));

      accumulate(l_obs, huber(slice_cols(decode_obs(h, z), 0, batch.d_obs), batch.obs_target[t]));
      if (t < batch.steps)
        accumulate(l_act, huber(slice_cols(decode_action(h, z), 0, batch.n_agents * kNumActions),
                                batch.act_target[t]));
      if (t > 0) accumulate(l_rew, huber(decode_reward(h, z), batch.rew_target[t - 1]));
    }

    l_obs = scale(l_obs, T(1) / T(batch.steps + 1));
    l_act = scale(l_act, T(1) / T(batch.steps));
    l_rew = scale(l_rew, T(1) / T(batch.steps));
    l_kl = scale(l_kl, T(1) / T(batch.steps + 1));

    ModelLossT<T> parts;
    parts.total = add(add(l_act, l_obs), add(l_rew, l_kl));
    parts.act = l_act.item();
    parts.obs = l_obs.item();
    parts.rew = l_rew.item();
    parts.kl = l_kl.item();
    parts.total_value = parts.total.item();
    return parts;
  }

  static TensorT<T> normal_noise(int rows, int cols, Rng& rng) {
    std::vector<T> v(size_t(rows) * cols);
    for (auto& x : v) x = T(rng.normal());
    return TensorT<T>::from({rows, cols}, std::move(v));
  }

 private:
  GaussianParamsT<T> to_gaussian(const TensorT<T>& head_out) const {
    auto mean = slice_cols(head_out, 0, dims_.stoch);
    auto raw = slice_cols(head_out, dims_.stoch, 2 * dims_.stoch);
    return {mean, add_const(softplus_t(raw), T(dims_.min_std))};
  }

  ModelDims dims_;
  ParamStoreT<T> store_;
  Mlp2T<T> enc_, post_, prior_, dec_obs_, dec_rew_, dec_act_;
  TensorT<T> adv_w_, adv_b_, attn_q_, attn_k_, attn_v_;
  GruParamsT<T> gru_;
};

using WorldModel = WorldModelT<float>;

// --- float-only rollout machinery ---

// Chooses actions for a batch of per-agent policy inputs during imagination.
// Returning log-probabilities (behavior policy) and state values.
class ImaginationActor {
 public:
  virtual ~ImaginationActor() = default;
  virtual void act(const std::vector<float>& inputs, int rows, int in_dim,
                   std::vector<int>& actions, std::vector<float>& logp,
                   std::vector<float>& values) = 0;
  virtual void values_only(const std::vector<float>& inputs, int rows, int in_dim,
                           std::vector<float>& values) = 0;
};

// One latent start per (episode, timestep): all agents advance in lockstep.
struct ImaginationStart {
  std::vector<float> h;           // n_agents x det
  std::vector<float> z;           // n_agents x stoch
  std::vector<float> real_obs;    // n_agents x d_obs, observation at the start step
  std::vector<int> prev_action;   // joint action taken before the start step
};

struct ImaginedRollout {
  std::string source = "imagined";
  int n_starts = 0, horizon = 0, n_agents = 0, input_dim = 0, d_obs = 0;
  // per step: rows = n_starts * n_agents
  std::vector<std::vector<float>> policy_inputs;  // horizon x [rows * input_dim]
  std::vector<std::vector<int>> actions;          // horizon x [rows]
  std::vector<std::vector<float>> logp;           // horizon x [rows]
  std::vector<std::vector<float>> values;         // horizon x [rows]
  std::vector<std::vector<float>> rewards;        // horizon x [n_starts], shared
  std::vector<std::vector<float>> decoded_obs;    // horizon x [rows * d_obs]
  std::vector<std::vector<float>> latent_h;       // horizon x [rows * det]
  std::vector<std::vector<float>> latent_z;       // horizon x [rows * stoch]
  std::vector<float> bootstrap_values;            // [rows]
};

ImaginedRollout imagine(WorldModel& wm, const std::vector<ImaginationStart>& starts,
                        ImaginationActor& actor, int horizon, int n_agents, int d_obs,
                        Rng& noise_rng);

// Posterior filtering over an observed prefix (k steps), prior rollout with
// the given action sequence beyond it, observation decoding throughout.
// obs: steps x n_agents x d_obs; actions: (steps-1) x n_agents.
// Returns n_agents x steps x d_obs.
std::vector<std::vector<std::vector<float>>> open_loop_predict(
    WorldModel& wm, const std::vector<std::vector<std::vector<float>>>& obs,
    const std::vector<std::vector<int>>& actions, int prefix_len, int n_agents);

// Padded encoder input [n_agents rows]: observation, zero pad, one-hot id.
Tensor make_obs_id_rows(const ModelDims& dims, const std::vector<std::vector<float>>& obs);
// Padded joint one-hot action row, identical for every agent row.
std::vector<float> make_joint_action(const ModelDims& dims, const std::vector<int>& action);

// Policy input layout: [obs | predicted next obs | predicted next reward |
// one-hot agent id], observation blocks zero-padded to pad_obs.
int policy_input_dim(const ModelDims& dims);
void write_policy_input(const ModelDims& dims, std::span<const float> obs,
                        std::span<const float> pred_obs, float pred_rew, int agent_idx,
                        float* dst);

}  // namespace tocm
