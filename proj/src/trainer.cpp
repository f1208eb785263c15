#include "tocm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace tocm {

const char* kMetricsHeader =
    "env_steps,iteration,episode_reward_mean,obs_loss,rew_loss,act_loss,kl_loss,"
    "total_model_loss,policy_loss,value_loss,entropy,clip_fraction,buffer_episodes,transferred";

std::string metrics_csv_row(const IterationMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%lld,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%lld,%d",
                m.env_steps, m.iteration, m.episode_reward_mean, m.obs_loss, m.rew_loss,
                m.act_loss, m.kl_loss, m.total_model_loss, m.policy_loss, m.value_loss,
                m.entropy, m.clip_fraction, m.buffer_episodes, m.transferred);
  return buf;
}

namespace {

class PolicyAdapter : public ImaginationActor {
 public:
  PolicyAdapter(Policy& policy, Rng& rng) : policy_(policy), rng_(rng) {}
  void act(const std::vector<float>& inputs, int rows, int, std::vector<int>& actions,
           std::vector<float>& logp, std::vector<float>& values) override {
    policy_.act_batch(inputs, rows, /*greedy=*/false, rng_, actions, logp, values);
  }
  void values_only(const std::vector<float>& inputs, int rows, int,
                   std::vector<float>& values) override {
    policy_.value_batch(inputs, rows, values);
  }

 private:
  Policy& policy_;
  Rng& rng_;
};

Tensor joint_action_rows(const ModelDims& dims, const std::vector<int>& action, int rows) {
  auto joint = make_joint_action(dims, action);
  std::vector<float> flat(size_t(rows) * dims.act_dim());
  for (int i = 0; i < rows; ++i)
    std::copy(joint.begin(), joint.end(), flat.begin() + size_t(i) * dims.act_dim());
  return Tensor::from({rows, dims.act_dim()}, std::move(flat));
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      env_cfg_(make_env_config(cfg)),
      dims_(make_model_dims(cfg)),
      pol_cfg_(make_policy_config(cfg)),
      env_(env_cfg_),
      buffer_(cfg.buffer_capacity, cfg.max_steps),
      env_seed_rng_(uint64_t(cfg.seed), "env-seeds"),
      collect_rng_(uint64_t(cfg.seed), "collect-actions"),
      filter_noise_rng_(uint64_t(cfg.seed), "filter-noise"),
      model_noise_rng_(uint64_t(cfg.seed), "model-noise"),
      batch_rng_(uint64_t(cfg.seed), "model-batches"),
      imagine_rng_(uint64_t(cfg.seed), "imagination"),
      start_rng_(uint64_t(cfg.seed), "imagination-starts") {
  validate_config(cfg);
  wm_ = std::make_unique<WorldModel>(dims_, uint64_t(cfg.seed));
  policy_ = std::make_unique<Policy>(pol_cfg_, uint64_t(cfg.seed));
  model_opt_ = std::make_unique<AdamT<float>>(wm_->params(), float(cfg.model_lr),
                                              float(cfg.model_grad_clip));
}

void Trainer::filter_init(FilterState& fs, const std::vector<std::vector<float>>& obs,
                          Rng& noise) {
  fs.h = Tensor::zeros({env_cfg_.n_agents, dims_.det});
  auto s = wm_->encode(make_obs_id_rows(dims_, obs));
  fs.z = detach(sample_gaussian(wm_->posterior(fs.h, s),
                                WorldModel::normal_noise(env_cfg_.n_agents, dims_.stoch, noise)));
  fs.prev_action.assign(env_cfg_.n_agents, kActionNone);
}

void Trainer::filter_step(FilterState& fs, const std::vector<int>& action,
                          const std::vector<std::vector<float>>& obs, Rng& noise) {
  fs.h = detach(wm_->advance(fs.h, fs.z, joint_action_rows(dims_, action, env_cfg_.n_agents)));
  auto s = wm_->encode(make_obs_id_rows(dims_, obs));
  fs.z = detach(sample_gaussian(wm_->posterior(fs.h, s),
                                WorldModel::normal_noise(env_cfg_.n_agents, dims_.stoch, noise)));
  fs.prev_action = action;
}

void Trainer::predict_for_policy(const FilterState& fs,
                                 std::vector<std::vector<float>>& pred_obs,
                                 std::vector<float>& pred_rew) {
  const int n = env_cfg_.n_agents;
  auto h = wm_->advance(fs.h, fs.z, joint_action_rows(dims_, fs.prev_action, n));
  auto z = wm_->prior(h).mean;
  auto obs = wm_->decode_obs(h, z);
  auto rew = wm_->decode_reward(h, z);
  const int d = env_cfg_.obs_dim();
  pred_obs.assign(n, std::vector<float>(d));
  pred_rew.assign(n, 0.0f);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) pred_obs[i][j] = obs.at(i, j);
    pred_rew[i] = rew.at(i, 0);
  }
}

float Trainer::collect_episodes(int n) {
  const int n_agents = env_cfg_.n_agents;
  const int d_obs = env_cfg_.obs_dim();
  const int in_dim = policy_input_dim(dims_);
  const int T = env_cfg_.max_steps;
  const bool use_model = cfg_.algo == "tocm" && model_trained_;

  last_collect_ = CollectionBuffer{};
  last_collect_.episodes = n;
  last_collect_.steps = T;
  last_collect_.n_agents = n_agents;
  last_collect_.input_dim = in_dim;

  double reward_acc = 0;
  for (int e = 0; e < n; ++e) {
    const uint64_t ep_seed = env_seed_rng_.next_u64();
    auto obs = env_.reset(ep_seed);

    Episode ep;
    ep.n_agents = n_agents;
    ep.d_obs = d_obs;
    ep.steps = T;
    for (const auto& o : obs) ep.obs.insert(ep.obs.end(), o.begin(), o.end());

    FilterState fs;
    if (use_model) filter_init(fs, obs, filter_noise_rng_);
    std::vector<std::vector<float>> pred_obs(n_agents, std::vector<float>(d_obs, 0.0f));
    std::vector<float> pred_rew(n_agents, 0.0f);

    EpisodeTrace trace;
    std::vector<float> inputs(size_t(n_agents) * in_dim);
    std::vector<int> step_actions;
    std::vector<float> step_logp, step_values;
    while (!env_.done()) {
      if (use_model) predict_for_policy(fs, pred_obs, pred_rew);
      for (int i = 0; i < n_agents; ++i)
        write_policy_input(dims_, obs[i], pred_obs[i], pred_rew[i], i,
                           inputs.data() + size_t(i) * in_dim);
      policy_->act_batch(inputs, n_agents, /*greedy=*/false, collect_rng_, step_actions,
                         step_logp, step_values);
      JointAction action(step_actions.begin(), step_actions.end());
      last_collect_.inputs.insert(last_collect_.inputs.end(), inputs.begin(), inputs.end());
      last_collect_.actions.insert(last_collect_.actions.end(), step_actions.begin(),
                                   step_actions.end());
      last_collect_.logp.insert(last_collect_.logp.end(), step_logp.begin(), step_logp.end());
      auto r = env_.step(action);
      reward_acc += r.reward;
      if (!reward_range_seen_) {
        reward_low_ = reward_high_ = r.reward;
        reward_range_seen_ = true;
      } else {
        reward_low_ = std::min(reward_low_, r.reward);
        reward_high_ = std::max(reward_high_, r.reward);
      }
      last_collect_.rewards.push_back(r.reward);
      ep.actions.insert(ep.actions.end(), action.begin(), action.end());
      ep.rewards.push_back(r.reward);
      obs = r.observations;
      for (const auto& o : obs) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
      if (use_model) filter_step(fs, action, obs, filter_noise_rng_);
      if (!trace_dir_.empty()) trace.record(env_.state(), action, r.reward);
    }
    if (!trace_dir_.empty()) {
      std::filesystem::create_directories(trace_dir_);
      trace.write_csv(trace_dir_ + "/episode_" + std::to_string(buffer_.total_added()) + ".csv");
    }
    buffer_.add(std::move(ep));
    env_steps_ += T;
  }
  return float(reward_acc / n);
}

std::vector<ImaginationStart> Trainer::gather_starts() {
  const int n_agents = env_cfg_.n_agents;
  std::vector<ImaginationStart> starts;
  const int n_eps = std::min<int>(cfg_.imagination_episodes, int(buffer_.size()));
  for (int k = 0; k < n_eps; ++k) {
    const Episode& ep = buffer_.sample(start_rng_);
    auto h = Tensor::zeros({n_agents, dims_.det});
    Tensor z;
    for (int t = 0; t < ep.steps; ++t) {
      if (t > 0)
        h = detach(wm_->advance(h, z, joint_action_rows(dims_, ep.joint_action(t - 1), n_agents)));
      auto s = wm_->encode(make_obs_id_rows(dims_, ep.obs_rows(t)));
      z = detach(sample_gaussian(
          wm_->posterior(h, s), WorldModel::normal_noise(n_agents, dims_.stoch, imagine_rng_)));

      ImaginationStart st;
      st.h = h.data();
      st.z = z.data();
      for (int i = 0; i < n_agents; ++i) {
        auto o = ep.obs_at(t, i);
        st.real_obs.insert(st.real_obs.end(), o.begin(), o.end());
      }
      st.prev_action = t > 0 ? ep.joint_action(t - 1) : std::vector<int>(n_agents, kActionNone);
      starts.push_back(std::move(st));
    }
  }
  if (int(starts.size()) > cfg_.max_starts) {
    // deterministic partial shuffle, keep the first max_starts
    for (int i = 0; i < cfg_.max_starts; ++i) {
      const int j = i + start_rng_.uniform_int(int(starts.size()) - i);
      std::swap(starts[i], starts[j]);
    }
    starts.resize(cfg_.max_starts);
  }
  return starts;
}

PpoBatch Trainer::batch_from_rollout(const ImaginedRollout& roll) {
  const int per_step = roll.n_starts * roll.n_agents;
  const int horizon = roll.horizon;
  PpoBatch batch;
  batch.source = roll.source;
  batch.rows = horizon * per_step;
  batch.input_dim = roll.input_dim;
  batch.inputs.resize(size_t(batch.rows) * batch.input_dim);
  batch.actions.resize(batch.rows);
  batch.old_logp.resize(batch.rows);
  batch.advantages.resize(batch.rows);
  batch.value_targets.resize(batch.rows);

  std::vector<float> rewards(horizon), values(horizon + 1);
  for (int s = 0; s < roll.n_starts; ++s)
    for (int i = 0; i < roll.n_agents; ++i) {
      const int row = s * roll.n_agents + i;
      for (int t = 0; t < horizon; ++t) {
        rewards[t] = reward_range_seen_
                         ? std::min(std::max(roll.rewards[t][s], reward_low_), reward_high_)
                         : roll.rewards[t][s];
        values[t] = roll.values[t][row];
      }
      values[horizon] = roll.bootstrap_values[row];
      auto est = gae(rewards, values, pol_cfg_.discount, pol_cfg_.gae_lambda);
      for (int t = 0; t < horizon; ++t) {
        const size_t idx = size_t(t) * per_step + row;
        batch.actions[idx] = roll.actions[t][row];
        batch.old_logp[idx] = roll.logp[t][row];
        batch.advantages[idx] = est.advantages[t];
        batch.value_targets[idx] = est.value_targets[t];
        std::copy(roll.policy_inputs[t].begin() + size_t(row) * roll.input_dim,
                  roll.policy_inputs[t].begin() + size_t(row + 1) * roll.input_dim,
                  batch.inputs.begin() + idx * roll.input_dim);
      }
    }
  return batch;
}

PpoBatch Trainer::batch_from_collection() {
  const auto& col = last_collect_;
  const int rows = col.episodes * col.steps * col.n_agents;
  if (rows == 0) throw std::runtime_error("ppo: no freshly collected episodes");

  std::vector<float> values;
  policy_->value_batch(col.inputs, rows, values);

  PpoBatch batch;
  batch.source = "real";
  batch.rows = rows;
  batch.input_dim = col.input_dim;
  batch.inputs = col.inputs;
  batch.actions = col.actions;
  batch.old_logp = col.logp;
  batch.advantages.resize(rows);
  batch.value_targets.resize(rows);

  std::vector<float> rewards(col.steps), vals(col.steps + 1);
  for (int e = 0; e < col.episodes; ++e)
    for (int i = 0; i < col.n_agents; ++i) {
      for (int t = 0; t < col.steps; ++t) {
        rewards[t] = col.rewards[size_t(e) * col.steps + t];
        vals[t] = values[(size_t(e) * col.steps + t) * col.n_agents + i];
      }
      vals[col.steps] = 0.0f;  // fixed-horizon terminal
      auto est = gae(rewards, vals, pol_cfg_.discount, pol_cfg_.gae_lambda);
      for (int t = 0; t < col.steps; ++t) {
        const size_t idx = (size_t(e) * col.steps + t) * col.n_agents + i;
        batch.advantages[idx] = est.advantages[t];
        batch.value_targets[idx] = est.value_targets[t];
      }
    }
  return batch;
}

IterationMetrics Trainer::train_iteration() {
  IterationMetrics m;
  m.episode_reward_mean = collect_episodes(cfg_.episodes_per_iteration);
  if (int(buffer_.size()) < cfg_.batch_size)
    throw std::runtime_error("train_iteration: insufficient buffer (" +
                             std::to_string(buffer_.size()) + " episodes, need " +
                             std::to_string(cfg_.batch_size) + ")");

  if (cfg_.algo == "tocm" && cfg_.model_epochs > 0) {
    double obs = 0, rew = 0, act = 0, kl = 0, total = 0;
    for (int epoch = 0; epoch < cfg_.model_epochs; ++epoch) {
      std::vector<const Episode*> eps;
      for (int b = 0; b < cfg_.batch_size; ++b) eps.push_back(&buffer_.sample(batch_rng_));
      auto batch = build_sequence_batch(eps, dims_);
      auto parts = wm_->model_loss(batch, model_noise_rng_);
      backward(parts.total);
      model_opt_->step();
      ++model_grad_steps_;
      obs += parts.obs;
      rew += parts.rew;
      act += parts.act;
      kl += parts.kl;
      total += parts.total_value;
    }
    model_trained_ = true;
    m.obs_loss = obs / cfg_.model_epochs;
    m.rew_loss = rew / cfg_.model_epochs;
    m.act_loss = act / cfg_.model_epochs;
    m.kl_loss = kl / cfg_.model_epochs;
    m.total_model_loss = total / cfg_.model_epochs;
    if (cfg_.stop_at_obs_loss > 0 && m.obs_loss <= cfg_.stop_at_obs_loss)
      obs_target_reached_ = true;
  }

  double ploss = 0, vloss = 0, ent = 0, clip = 0;
  for (int round = 0; round < cfg_.marl_epochs; ++round) {
    PpoBatch batch;
    if (cfg_.algo == "tocm") {
      auto starts = gather_starts();
      PolicyAdapter adapter(*policy_, imagine_rng_);
      auto roll = imagine(*wm_, starts, adapter, cfg_.imagination_horizon, env_cfg_.n_agents,
                          env_cfg_.obs_dim(), imagine_rng_);
      batch = batch_from_rollout(roll);
      if (batch.source != "imagined")
        throw std::logic_error("policy training consumed non-imagined data");
    } else {
      batch = batch_from_collection();
    }
    auto stats = policy_->ppo_update(batch);
    ploss += stats.actor_loss;
    vloss += stats.critic_loss;
    ent += stats.entropy;
    clip += stats.clip_fraction;
  }
  if (cfg_.marl_epochs > 0) {
    m.policy_loss = ploss / cfg_.marl_epochs;
    m.value_loss = vloss / cfg_.marl_epochs;
    m.entropy = ent / cfg_.marl_epochs;
    m.clip_fraction = clip / cfg_.marl_epochs;
  }

  m.env_steps = env_steps_;
  m.iteration = ++iteration_;
  m.buffer_episodes = static_cast<long long>(buffer_.size());
  m.transferred = transferred_flag_;
  return m;
}

void Trainer::pretrain_model(int gradient_steps) {
  if (int(buffer_.size()) < cfg_.batch_size)
    throw std::runtime_error("pretrain: insufficient buffer");
  for (int step = 0; step < gradient_steps; ++step) {
    std::vector<const Episode*> eps;
    for (int b = 0; b < cfg_.batch_size; ++b) eps.push_back(&buffer_.sample(batch_rng_));
    auto batch = build_sequence_batch(eps, dims_);
    auto parts = wm_->model_loss(batch, model_noise_rng_);
    backward(parts.total);
    model_opt_->step();
    ++model_grad_steps_;
  }
  if (gradient_steps > 0) model_trained_ = true;
}

Trainer::TransferReport Trainer::transfer_load(const CheckpointData& source, bool same_task) {
  static const char* kCore[] = {"wm/adv/", "wm/prior/"};
  TransferReport report;
  for (auto& [name, t] : wm_->params().items()) {
    const bool core = std::any_of(std::begin(kCore), std::end(kCore),
                                  [&](const char* p) { return name.rfind(p, 0) == 0; });
    if (core || same_task) {
      const Tensor* src = source.find(name);
      if (!src) throw std::runtime_error("transfer: source lacks tensor '" + name + "'");
      if (src->shape() != t.shape())
        throw std::runtime_error("transfer: incompatible core dimensions for '" + name +
                                 "': " + shape_str(src->shape()) + " vs " + shape_str(t.shape()));
      t.data() = src->data();
      report.transferred.push_back(name);
    } else {
      report.reinitialized.push_back(name);
    }
  }
  transferred_flag_ = 1;
  return report;
}

CheckpointData Trainer::checkpoint() const {
  return snapshot_stores(
      {&wm_->params(), &policy_->actor_params(), &policy_->critic_params()});
}

void Trainer::restore(const CheckpointData& data) {
  restore_store(wm_->params(), data);
  restore_store(policy_->actor_params(), data);
  restore_store(policy_->critic_params(), data);
  policy_->sync_old();
  policy_->reseed_optimizers();
  model_opt_ = std::make_unique<AdamT<float>>(wm_->params(), float(cfg_.model_lr),
                                              float(cfg_.model_grad_clip));
  model_trained_ = cfg_.algo == "tocm";
}

std::vector<float> Trainer::evaluate(int episodes, bool greedy, uint64_t seed) {
  if (episodes <= 0) throw std::invalid_argument("evaluate: episode count must be positive");
  const int n_agents = env_cfg_.n_agents;
  const int d_obs = env_cfg_.obs_dim();
  const int in_dim = policy_input_dim(dims_);
  const bool use_model = cfg_.algo == "tocm" && model_trained_;

  ParticleEnv env(env_cfg_);
  Rng env_seeds(seed, "eval-env");
  Rng act_rng(seed, "eval-actions");
  Rng noise(seed, "eval-noise");

  std::vector<float> totals;
  for (int e = 0; e < episodes; ++e) {
    auto obs = env.reset(env_seeds.next_u64());
    FilterState fs;
    if (use_model) filter_init(fs, obs, noise);
    std::vector<std::vector<float>> pred_obs(n_agents, std::vector<float>(d_obs, 0.0f));
    std::vector<float> pred_rew(n_agents, 0.0f);
    float total = 0;
    while (!env.done()) {
      if (use_model) predict_for_policy(fs, pred_obs, pred_rew);
      JointAction action;
      std::vector<float> input(in_dim);
      for (int i = 0; i < n_agents; ++i) {
        write_policy_input(dims_, obs[i], pred_obs[i], pred_rew[i], i, input.data());
        action.push_back(policy_->act(input, greedy, act_rng).action);
      }
      auto r = env.step(action);
      total += r.reward;
      obs = r.observations;
      if (use_model) filter_step(fs, action, obs, noise);
    }
    totals.push_back(total);
  }
  return totals;
}

Episode Trainer::rollout_episode(uint64_t seed) {
  const int n_agents = env_cfg_.n_agents;
  const int d_obs = env_cfg_.obs_dim();
  const int in_dim = policy_input_dim(dims_);
  const bool use_model = cfg_.algo == "tocm" && model_trained_;

  ParticleEnv env(env_cfg_);
  Rng act_rng(seed, "predict-actions");
  Rng noise(seed, "predict-noise");
  auto obs = env.reset(seed);

  Episode ep;
  ep.n_agents = n_agents;
  ep.d_obs = d_obs;
  ep.steps = env_cfg_.max_steps;
  for (const auto& o : obs) ep.obs.insert(ep.obs.end(), o.begin(), o.end());

  FilterState fs;
  if (use_model) filter_init(fs, obs, noise);
  std::vector<std::vector<float>> pred_obs(n_agents, std::vector<float>(d_obs, 0.0f));
  std::vector<float> pred_rew(n_agents, 0.0f);
  while (!env.done()) {
    if (use_model) predict_for_policy(fs, pred_obs, pred_rew);
    JointAction action;
    std::vector<float> input(in_dim);
    for (int i = 0; i < n_agents; ++i) {
      write_policy_input(dims_, obs[i], pred_obs[i], pred_rew[i], i, input.data());
      action.push_back(policy_->act(input, /*greedy=*/false, act_rng).action);
    }
    auto r = env.step(action);
    ep.actions.insert(ep.actions.end(), action.begin(), action.end());
    ep.rewards.push_back(r.reward);
    obs = r.observations;
    for (const auto& o : obs) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
    if (use_model) filter_step(fs, action, obs, noise);
  }
  return ep;
}

// --- run artifacts ---

RunArtifacts::RunArtifacts(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("run directory not writable: " + dir_);
  std::ofstream probe(dir_ + "/.write_probe");
  if (!probe) throw std::runtime_error("run directory not writable: " + dir_);
  probe.close();
  std::filesystem::remove(dir_ + "/.write_probe", ec);
}

std::string RunArtifacts::checkpoint_path(long long env_steps) const {
  return dir_ + "/ckpt_" + std::to_string(env_steps) + ".tocm";
}

void RunArtifacts::write_config(const TrainConfig& cfg) {
  std::ofstream out(config_path(), std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + config_path());
  out << emit_config(cfg);
}

void RunArtifacts::append_metrics(const IterationMetrics& m) {
  std::ofstream out(metrics_path(), std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + metrics_path());
  if (!header_written_ && std::filesystem::file_size(metrics_path()) == 0) {
    out << kMetricsHeader << "\n";
  }
  header_written_ = true;
  out << metrics_csv_row(m) << "\n";
  out.flush();
}

RunResult run_training(const TrainConfig& cfg, RunArtifacts& artifacts,
                       const std::optional<std::string>& transfer_source,
                       const std::function<void(const IterationMetrics&)>& on_iteration) {
  validate_config(cfg);
  Trainer trainer(cfg);
  artifacts.write_config(cfg);

  if (transfer_source) {
    auto source = load_checkpoint(*transfer_source);
    // same task <=> the source run's config matches on task shape
    bool same_task = false;
    const auto source_cfg_path =
        std::filesystem::path(*transfer_source).parent_path() / "config.cfg";
    if (std::filesystem::exists(source_cfg_path)) {
      auto src_cfg = load_config(source_cfg_path.string());
      same_task = src_cfg.task == cfg.task && src_cfg.n_agents == cfg.n_agents &&
                  src_cfg.pad_obs == cfg.pad_obs && src_cfg.pad_agents == cfg.pad_agents;
    }
    auto report = trainer.transfer_load(source, same_task);
    std::ofstream log(artifacts.transfer_log_path());
    for (const auto& name : report.transferred) log << name << " transferred\n";
    for (const auto& name : report.reinitialized) log << name << " reinitialized\n";
  }

  if (cfg.export_traces) trainer.set_trace_dir(artifacts.dir() + "/traces");

  // Prefill so the first iteration satisfies the batch-size precondition.
  trainer.collect_episodes(std::max(cfg.batch_size, cfg.prefill_episodes));
  if (cfg.pretrain_model_steps > 0) trainer.pretrain_model(cfg.pretrain_model_steps);

  long long next_ckpt = cfg.checkpoint_every;
  std::vector<double> recent_rewards;
  while (trainer.env_steps() < cfg.total_env_steps) {
    auto m = trainer.train_iteration();
    artifacts.append_metrics(m);
    if (on_iteration) on_iteration(m);
    recent_rewards.push_back(m.episode_reward_mean);
    while (trainer.env_steps() >= next_ckpt) {
      save_checkpoint(artifacts.checkpoint_path(trainer.env_steps()), trainer.checkpoint());
      next_ckpt += cfg.checkpoint_every;
    }
    if (cfg.stop_at_obs_loss > 0 && trainer.obs_loss_target_reached()) break;
  }
  save_checkpoint(artifacts.final_checkpoint_path(), trainer.checkpoint());

  RunResult result;
  result.env_steps = trainer.env_steps();
  result.iterations = trainer.iteration();
  const size_t window = std::min<size_t>(10, recent_rewards.size());
  if (window > 0)
    result.final_reward_mean =
        std::accumulate(recent_rewards.end() - window, recent_rewards.end(), 0.0) / window;
  return result;
}

}  // namespace tocm
