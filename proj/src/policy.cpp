#include "tocm/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "tocm/spiking.hpp"

namespace tocm {

namespace {

class DenseActor : public ActorNet {
 public:
  DenseActor(const PolicyConfig& cfg, uint64_t seed) {
    Rng rng(seed, "init/actor");
    trunk_ = Mlp2T<float>::create(store_, "actor/trunk", cfg.input_dim, cfg.hidden, cfg.hidden,
                                  rng);
    w3_ = store_.add("actor/w3", init_linear<float>(rng, cfg.hidden, 5));
    b3_ = store_.add("actor/b3", init_zeros_row<float>(5));
  }

  Tensor logits(const Tensor& x) override { return affine(elu_t(trunk_(x)), w3_, b3_); }

  ParamStore& params() override { return store_; }
  const ParamStore& params() const override { return store_; }

 private:
  ParamStore store_;
  Mlp2T<float> trunk_;
  Tensor w3_, b3_;
};

}  // namespace

std::unique_ptr<ActorNet> make_actor(const PolicyConfig& cfg, uint64_t seed) {
  if (cfg.actor_kind == "dense") return std::make_unique<DenseActor>(cfg, seed);
  if (cfg.actor_kind == "spiking") return std::make_unique<SpikingActor>(cfg, seed);
  throw std::invalid_argument("unknown actor kind '" + cfg.actor_kind + "'");
}

GaeResult gae(std::span<const float> rewards, std::span<const float> values, float discount,
              float lambda) {
  const size_t steps = rewards.size();
  if (values.size() != steps + 1)
    throw std::invalid_argument("gae: need one more value than rewards");
  GaeResult out;
  out.advantages.resize(steps);
  out.value_targets.resize(steps);
  float running = 0.0f;
  for (size_t i = steps; i-- > 0;) {
    const float delta = rewards[i] + discount * values[i + 1] - values[i];
    running = delta + discount * lambda * running;
    out.advantages[i] = running;
    out.value_targets[i] = running + values[i];
  }
  return out;
}

Policy::Policy(const PolicyConfig& cfg, uint64_t seed) : cfg_(cfg) {
  actor_ = make_actor(cfg, seed);
  old_actor_ = make_actor(cfg, seed);
  Rng rng(seed, "init/critic");
  critic_trunk_ =
      Mlp2T<float>::create(critic_store_, "critic/trunk", cfg.input_dim, cfg.hidden, cfg.hidden,
                           rng);
  critic_w3_ = critic_store_.add("critic/w3", init_linear<float>(rng, cfg.hidden, 1));
  critic_b3_ = critic_store_.add("critic/b3", init_zeros_row<float>(1));
  reseed_optimizers();
  sync_old();
}

void Policy::reseed_optimizers() {
  actor_opt_ = std::make_unique<Adam>(actor_->params(), cfg_.lr, cfg_.grad_clip);
  critic_opt_ = std::make_unique<Adam>(critic_store_, cfg_.critic_lr, cfg_.grad_clip);
}

void Policy::sync_old() { old_actor_->params().copy_values_from(actor_->params()); }

Tensor Policy::critic_forward(const Tensor& x) {
  return affine(elu_t(critic_trunk_(x)), critic_w3_, critic_b3_);
}

ActResult Policy::act(std::span<const float> input, bool greedy, Rng& rng) {
  auto x = Tensor::from({1, int(input.size())}, std::vector<float>(input.begin(), input.end()));
  auto logits = old_actor_->logits(x);
  for (float v : logits.data())
    if (!std::isfinite(v)) throw std::runtime_error("act: non-finite logits");
  auto probs = softmax_rows(logits);
  const float* row = probs.data().data();
  int a = 0;
  if (greedy) {
    for (int j = 1; j < 5; ++j)
      if (row[j] > row[a]) a = j;
  } else {
    a = rng.categorical(std::span<const float>(row, 5));
  }
  float entropy = 0;
  for (int j = 0; j < 5; ++j)
    if (row[j] > 0) entropy -= row[j] * std::log(row[j]);
  return {a, std::log(std::max(row[a], 1e-12f)), entropy};
}

float Policy::value(std::span<const float> input) {
  auto x = Tensor::from({1, int(input.size())}, std::vector<float>(input.begin(), input.end()));
  return critic_forward(x).at(0, 0);
}

void Policy::act_batch(const std::vector<float>& inputs, int rows, bool greedy, Rng& rng,
                       std::vector<int>& actions, std::vector<float>& logp,
                       std::vector<float>& values) {
  const int d = cfg_.input_dim;
  if (int64_t(inputs.size()) != int64_t(rows) * d)
    throw std::invalid_argument("act_batch: input size mismatch");
  auto x = Tensor::from({rows, d}, inputs);
  auto probs = softmax_rows(old_actor_->logits(x));
  for (float p : probs.data())
    if (!std::isfinite(p)) throw std::runtime_error("act: non-finite logits");
  auto v = critic_forward(x);

  actions.resize(rows);
  logp.resize(rows);
  values.resize(rows);
  for (int r = 0; r < rows; ++r) {
    const float* row = probs.data().data() + size_t(r) * 5;
    int a;
    if (greedy) {
      a = 0;
      for (int j = 1; j < 5; ++j)
        if (row[j] > row[a]) a = j;
    } else {
      a = rng.categorical(std::span<const float>(row, 5));
    }
    actions[r] = a;
    logp[r] = std::log(std::max(row[a], 1e-12f));
    values[r] = v.at(r, 0);
  }
}

void Policy::value_batch(const std::vector<float>& inputs, int rows, std::vector<float>& values) {
  auto x = Tensor::from({rows, cfg_.input_dim}, inputs);
  auto v = critic_forward(x);
  values.resize(rows);
  for (int r = 0; r < rows; ++r) values[r] = v.at(r, 0);
}

PpoStats Policy::ppo_update(const PpoBatch& batch) {
  const int rows = batch.rows;
  if (rows <= 0 || int64_t(batch.inputs.size()) != int64_t(rows) * batch.input_dim)
    throw std::invalid_argument("ppo_update: malformed batch");
  if (int(batch.old_logp.size()) != rows)
    throw std::invalid_argument("ppo_update: missing old log-probabilities");
  if (batch.input_dim != cfg_.input_dim)
    throw std::invalid_argument("ppo_update: input width mismatch");

  // Normalize advantages to zero mean, unit variance per batch.
  double mean = 0;
  for (float a : batch.advantages) mean += a;
  mean /= rows;
  double var = 0;
  for (float a : batch.advantages) var += (a - mean) * (a - mean);
  const float denom = float(std::sqrt(var / rows) + 1e-8);
  std::vector<float> adv(rows);
  for (int r = 0; r < rows; ++r) adv[r] = (batch.advantages[r] - float(mean)) / denom;

  auto x = Tensor::from({rows, cfg_.input_dim}, batch.inputs);
  auto adv_col = Tensor::from({rows, 1}, adv);
  auto old_logp = Tensor::from({rows, 1}, batch.old_logp);
  auto targets = Tensor::from({rows, 1}, batch.value_targets);
  std::vector<float> mask(size_t(rows) * 5, 0.0f);
  for (int r = 0; r < rows; ++r) mask[size_t(r) * 5 + batch.actions[r]] = 1.0f;
  auto action_mask = Tensor::from({rows, 5}, mask);

  PpoStats stats;
  for (int pass = 0; pass < cfg_.ppo_passes; ++pass) {
    auto logits = actor_->logits(x);
    auto logp_all = log_softmax_rows(logits);
    auto logp_taken = rowsum(mul(logp_all, action_mask));
    auto ratio = exp_t(sub(logp_taken, old_logp));
    auto clipped = clamp_t(ratio, 1.0f - cfg_.clip_eps, 1.0f + cfg_.clip_eps);
    auto surrogate = min_elem(mul(ratio, adv_col), mul(clipped, adv_col));
    auto actor_loss = neg(mean_all(surrogate));

    auto probs = exp_t(logp_all);
    auto entropy = neg(mean_all(rowsum(mul(probs, logp_all))));

    auto v = critic_forward(x);
    auto verr = sub(v, targets);
    auto critic_loss = mean_all(mul(verr, verr));

    auto total = sub(add(actor_loss, scale(critic_loss, cfg_.value_coef)),
                     scale(entropy, cfg_.entropy_coef));

    if (pass == cfg_.ppo_passes - 1) {
      stats.actor_loss = actor_loss.item();
      stats.critic_loss = critic_loss.item();
      stats.entropy = entropy.item();
      int clipped_count = 0;
      for (int r = 0; r < rows; ++r)
        if (std::abs(ratio.at(r, 0) - 1.0f) > cfg_.clip_eps) ++clipped_count;
      stats.clip_fraction = float(clipped_count) / rows;
    }

    backward(total);
    actor_opt_->step();
    critic_opt_->step();
  }

  sync_old();  // theta_old <- theta
  return stats;
}

}  // namespace tocm
