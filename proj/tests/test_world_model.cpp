#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "tocm/env.hpp"
#include "tocm/replay.hpp"
#include "tocm/world_model.hpp"

using namespace tocm;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.det = 64;
  d.stoch = 16;
  d.mental = 32;
  d.hidden = 64;
  d.attn_tokens = 4;
  return d;
}

void zero_params(auto& store) {
  for (auto& [name, t] : store.items()) t.data().assign(t.data().size(), 0.0f);
}

Episode roll_episode(ParticleEnv& env, uint64_t seed) {
  Episode ep;
  ep.n_agents = env.config().n_agents;
  ep.d_obs = env.config().obs_dim();
  ep.steps = env.config().max_steps;
  Rng rng(seed, "episode-actions");
  auto obs = env.reset(seed);
  for (const auto& o : obs) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
  while (!env.done()) {
    JointAction act;
    for (int i = 0; i < ep.n_agents; ++i) act.push_back(rng.uniform_int(kNumActions));
    auto r = env.step(act);
    ep.actions.insert(ep.actions.end(), act.begin(), act.end());
    ep.rewards.push_back(r.reward);
    for (const auto& o : r.observations) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
  }
  return ep;
}

// Closed-loop reconstruction error through posterior filtering.
float filtered_obs_mae(WorldModel& wm, const Episode& ep) {
  const auto& dims = wm.dims();
  auto h = Tensor::zeros({ep.n_agents, dims.det});
  Tensor z;
  double acc = 0;
  int64_t count = 0;
  for (int t = 0; t <= ep.steps; ++t) {
    if (t > 0) {
      auto joint = make_joint_action(dims, ep.joint_action(t - 1));
      std::vector<float> rows;
      for (int i = 0; i < ep.n_agents; ++i) rows.insert(rows.end(), joint.begin(), joint.end());
      h = detach(wm.advance(h, z, Tensor::from({ep.n_agents, dims.act_dim()}, rows)));
    }
    auto s = wm.encode(make_obs_id_rows(dims, ep.obs_rows(t)));
    z = detach(wm.posterior(h, s).mean);
    auto decoded = wm.decode_obs(h, z);
    for (int i = 0; i < ep.n_agents; ++i) {
      auto o = ep.obs_at(t, i);
      for (int j = 0; j < ep.d_obs; ++j) {
        acc += std::abs(double(decoded.at(i, j)) - double(o[j]));
        ++count;
      }
    }
  }
  return float(acc / count);
}

struct ScriptedActor : ImaginationActor {
  const Episode* ep = nullptr;
  int step = 0;
  void act(const std::vector<float>&, int rows, int, std::vector<int>& actions,
           std::vector<float>& logp, std::vector<float>& values) override {
    actions.assign(rows, 0);
    if (ep)
      for (int r = 0; r < rows; ++r) actions[r] = ep->actions[size_t(step) * ep->n_agents +
                                                              (r % ep->n_agents)];
    logp.assign(rows, 0.0f);
    values.assign(rows, 0.0f);
    ++step;
  }
  void values_only(const std::vector<float>&, int rows, int,
                   std::vector<float>& values) override {
    values.assign(rows, 0.0f);
  }
};

}  // namespace

TEST_CASE("encode is deterministic, zero at zero weights, and 64-wide by default") {
  ModelDims dims;  // full-size defaults
  WorldModel wm(dims, 5);
  Rng rng(6, "enc");
  std::vector<float> row(dims.enc_in());
  for (auto& x : row) x = float(rng.uniform(-1, 1));
  auto o = Tensor::from({1, dims.enc_in()}, row);
  auto s1 = wm.encode(o);
  auto s2 = wm.encode(o);
  CHECK(s1.cols() == 64);
  CHECK(std::memcmp(s1.data().data(), s2.data().data(), s1.data().size() * sizeof(float)) == 0);

  zero_params(wm.params());
  auto s0 = wm.encode(o);
  for (float v : s0.data()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(wm.encode(Tensor::zeros({1, dims.enc_in() + 1})), std::invalid_argument);
}

TEST_CASE("posterior: stddev floor and zero-weight values") {
  auto dims = small_dims();
  WorldModel wm(dims, 9);
  Rng rng(10, "post");
  auto h = WorldModel::normal_noise(3, dims.det, rng);
  auto s = WorldModel::normal_noise(3, dims.mental, rng);
  auto g = wm.posterior(h, s);
  CHECK(g.mean.cols() == dims.stoch);
  for (float v : g.stddev.data()) CHECK(v >= 0.1f);

  zero_params(wm.params());
  auto g0 = wm.posterior(h, s);
  const float expected = float(std::log(2.0) + 0.1);
  for (float v : g0.mean.data()) CHECK(v == 0.0f);
  for (float v : g0.stddev.data()) CHECK(v == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("prior: deterministic, right width, zero KL when posterior ignores s") {
  auto dims = small_dims();
  WorldModel wm(dims, 11);
  Rng rng(12, "prior");
  auto h = WorldModel::normal_noise(2, dims.det, rng);
  auto p1 = wm.prior(h);
  auto p2 = wm.prior(h);
  CHECK(p1.mean.cols() == dims.stoch);
  CHECK(p1.mean.data() == p2.mean.data());
  CHECK(p1.stddev.data() == p2.stddev.data());

  // Random nets: posterior differs from prior on informative s.
  auto s = WorldModel::normal_noise(2, dims.mental, rng);
  CHECK(gaussian_kl(wm.posterior(h, s), wm.prior(h)).item() > 0.0f);

  // Make the posterior head ignore s and mirror the prior head exactly.
  auto& store = wm.params();
  auto& pw1 = store.get("wm/post/w1").data();
  const auto& rw1 = store.get("wm/prior/w1").data();
  std::fill(pw1.begin(), pw1.end(), 0.0f);
  for (int r = 0; r < dims.det; ++r)
    for (int c = 0; c < dims.hidden; ++c) pw1[size_t(r) * dims.hidden + c] = rw1[size_t(r) * dims.hidden + c];
  store.get("wm/post/b1").data() = store.get("wm/prior/b1").data();
  store.get("wm/post/w2").data() = store.get("wm/prior/w2").data();
  store.get("wm/post/b2").data() = store.get("wm/prior/b2").data();
  CHECK(gaussian_kl(wm.posterior(h, s), wm.prior(h)).item() == 0.0f);
}

TEST_CASE("advance: deterministic, zero fixed point, gradient reaches the action") {
  auto dims = small_dims();
  WorldModel wm(dims, 13);
  Rng rng(14, "adv");
  auto h = WorldModel::normal_noise(2, dims.det, rng);
  auto z = WorldModel::normal_noise(2, dims.stoch, rng);
  std::vector<float> av(size_t(2) * dims.act_dim(), 0.0f);
  av[0 * dims.act_dim() + 2] = 1.0f;
  av[1 * dims.act_dim() + 2] = 1.0f;
  auto a = Tensor::from({2, dims.act_dim()}, av);

  auto h1 = wm.advance(h, z, a);
  auto h2 = wm.advance(h, z, a);
  CHECK(h1.cols() == dims.det);
  CHECK(h1.data() == h2.data());

  // finite-difference probe on one action input
  const float eps = 1e-3f;
  auto bump = av;
  bump[7] += eps;
  auto h_up = wm.advance(h, z, Tensor::from({2, dims.act_dim()}, bump));
  bump[7] -= 2 * eps;
  auto h_dn = wm.advance(h, z, Tensor::from({2, dims.act_dim()}, bump));
  double diff = 0;
  for (size_t i = 0; i < h_up.data().size(); ++i)
    diff += std::abs(double(h_up.data()[i]) - double(h_dn.data()[i]));
  CHECK(diff > 1e-6);

  zero_params(wm.params());
  auto hz = wm.advance(Tensor::zeros({2, dims.det}), z, a);
  for (float v : hz.data()) CHECK(v == 0.0f);
}

TEST_CASE("decoders: softmax action rows, padded obs width") {
  auto dims = small_dims();
  WorldModel wm(dims, 15);
  Rng rng(16, "dec");
  auto h = WorldModel::normal_noise(3, dims.det, rng);
  auto z = WorldModel::normal_noise(3, dims.stoch, rng);

  auto probs = wm.decode_action(h, z);
  CHECK(probs.cols() == dims.act_dim());
  for (int r = 0; r < 3; ++r)
    for (int slot = 0; slot < dims.pad_agents; ++slot) {
      double s = 0;
      for (int a = 0; a < kNumActions; ++a) s += probs.at(r, slot * kNumActions + a);
      CHECK(std::abs(s - 1.0) < 1e-6);
    }

  CHECK(wm.decode_obs(h, z).cols() == dims.pad_obs);
  CHECK(wm.decode_reward(h, z).cols() == 1);
}

TEST_CASE("model_loss: zero model on zero data leaves only the action term") {
  auto dims = small_dims();
  WorldModel wm(dims, 17);
  zero_params(wm.params());

  Episode ep;
  ep.n_agents = 2;
  ep.d_obs = 4;
  ep.steps = 3;
  ep.obs.assign(size_t(ep.steps + 1) * ep.n_agents * ep.d_obs, 0.0f);
  ep.actions = {0, 1, 2, 3, 4, 0};
  ep.rewards.assign(ep.steps, 0.0f);
  const Episode* eps[] = {&ep};
  auto batch = build_sequence_batch(eps, dims);

  Rng noise(18, "noise");
  auto parts = wm.model_loss(batch, noise);
  CHECK(parts.obs == 0.0f);
  CHECK(parts.rew == 0.0f);
  CHECK(parts.kl == 0.0f);
  // uniform decoder vs one-hot targets: mean([0.32]*2 + [0.02]*8) = 0.08
  CHECK(parts.act == doctest::Approx(0.08).epsilon(1e-5));
  CHECK(parts.total_value == doctest::Approx(parts.act).epsilon(1e-6));
}

TEST_CASE("model_loss: additivity and non-negative components on a real batch") {
  auto dims = small_dims();
  WorldModel wm(dims, 19);
  EnvConfig cfg;
  cfg.n_agents = 3;
  ParticleEnv env(cfg);
  Episode e1 = roll_episode(env, 100), e2 = roll_episode(env, 101);
  const Episode* eps[] = {&e1, &e2};
  auto batch = build_sequence_batch(eps, dims);
  Rng noise(20, "noise");
  auto parts = wm.model_loss(batch, noise);
  CHECK(parts.act >= 0.0f);
  CHECK(parts.obs >= 0.0f);
  CHECK(parts.rew >= 0.0f);
  CHECK(parts.kl >= 0.0f);
  CHECK(std::abs(parts.total_value - (parts.act + parts.obs + parts.rew + parts.kl)) < 1e-5);

  Episode incomplete = e1;
  incomplete.rewards.pop_back();
  const Episode* bad[] = {&incomplete};
  CHECK_THROWS(build_sequence_batch(bad, dims));
}

TEST_CASE("parameter count does not grow with the number of agents") {
  ModelDims dims;  // shared pads across the task family
  WorldModel wm2(dims, 1), wm3(dims, 2), wm4(dims, 3);
  const int64_t c2 = wm2.params().scalar_count();
  CHECK(c2 == wm3.params().scalar_count());
  CHECK(c2 == wm4.params().scalar_count());
}

TEST_CASE("one-step loss pipeline passes a double-precision gradient check") {
  ModelDims dims;
  dims.det = 8;
  dims.stoch = 4;
  dims.mental = 6;
  dims.hidden = 8;
  dims.attn_tokens = 2;
  dims.pad_obs = 6;
  dims.pad_agents = 2;
  dims.free_nats = 0.0f;
  WorldModelT<double> wm(dims, 23);

  const int n = 2, d_obs = 5, T = 2;
  Rng rng(24, "gc-batch");
  SequenceBatchT<double> batch;
  batch.rows = n;
  batch.steps = T;
  batch.n_agents = n;
  batch.d_obs = d_obs;
  for (int t = 0; t <= T; ++t) {
    std::vector<double> oid(size_t(n) * dims.enc_in(), 0.0);
    std::vector<double> target(size_t(n) * d_obs);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d_obs; ++j) {
        const double v = rng.uniform(-1, 1);
        oid[size_t(i) * dims.enc_in() + j] = v;
        target[size_t(i) * d_obs + j] = v;
      }
      oid[size_t(i) * dims.enc_in() + dims.pad_obs + i] = 1.0;
    }
    batch.obs_id.push_back(TensorT<double>::from({n, dims.enc_in()}, std::move(oid)));
    batch.obs_target.push_back(TensorT<double>::from({n, d_obs}, std::move(target)));
  }
  for (int t = 0; t < T; ++t) {
    std::vector<double> joint(size_t(n) * dims.act_dim(), 0.0);
    std::vector<double> at(size_t(n) * n * kNumActions, 0.0);
    const int a0 = rng.uniform_int(5), a1 = rng.uniform_int(5);
    for (int i = 0; i < n; ++i) {
      joint[size_t(i) * dims.act_dim() + a0] = 1.0;
      joint[size_t(i) * dims.act_dim() + kNumActions + a1] = 1.0;
      at[size_t(i) * n * kNumActions + a0] = 1.0;
      at[size_t(i) * n * kNumActions + kNumActions + a1] = 1.0;
    }
    batch.act_joint.push_back(TensorT<double>::from({n, dims.act_dim()}, std::move(joint)));
    batch.act_target.push_back(TensorT<double>::from({n, n * kNumActions}, std::move(at)));
    batch.rew_target.push_back(
        TensorT<double>::from({n, 1}, {rng.uniform(-2, 0), rng.uniform(-2, 0)}));
  }

  std::vector<TensorT<double>> inputs;
  for (auto& [name, t] : wm.params().items()) inputs.push_back(t);
  auto f = [&] {
    Rng noise(25, "gc-noise");
    return wm.model_loss(batch, noise).total;
  };
  CHECK(grad_check<double>(f, inputs, 1e-4) < 1e-4);
}

TEST_CASE("overfit one episode: loss falls, decoding sharpens, imagination tracks rewards") {
  auto dims = small_dims();
  WorldModel wm(dims, 27);
  EnvConfig cfg;
  cfg.n_agents = 3;
  ParticleEnv env(cfg);
  Episode ep = roll_episode(env, 500);
  const Episode* eps[] = {&ep};
  auto batch = build_sequence_batch(eps, dims);

  AdamT<float> opt(wm.params(), 1e-3f, 100.0f);
  Rng noise(28, "overfit-noise");
  float first = 0, last = 0;
  for (int step = 0; step < 2000; ++step) {
    auto parts = wm.model_loss(batch, noise);
    if (step == 0) first = parts.total_value;
    last = parts.total_value;
    backward(parts.total);
    opt.step();
  }
  CHECK(last < first);
  CHECK(filtered_obs_mae(wm, ep) < 0.05f);

  // imagined rewards on the overfitted episode
  auto s0 = wm.encode(make_obs_id_rows(dims, ep.obs_rows(0)));
  auto z0 = wm.posterior(Tensor::zeros({ep.n_agents, dims.det}), s0).mean;
  ImaginationStart start;
  start.h.assign(size_t(ep.n_agents) * dims.det, 0.0f);
  start.z = z0.data();
  for (int i = 0; i < ep.n_agents; ++i) {
    auto o = ep.obs_at(0, i);
    start.real_obs.insert(start.real_obs.end(), o.begin(), o.end());
  }
  start.prev_action.assign(ep.n_agents, kActionNone);

  ScriptedActor actor;
  actor.ep = &ep;
  Rng imagine_noise(29, "imagine-noise");
  const int horizon = 15;
  auto roll = imagine(wm, {start}, actor, horizon, ep.n_agents, ep.d_obs, imagine_noise);
  double err = 0;
  for (int t = 0; t < horizon; ++t) err += std::abs(roll.rewards[t][0] - ep.rewards[t]);
  CHECK(err / horizon < 0.1);
}

TEST_CASE("imagine: horizon one gives exactly one transition and runs are repeatable") {
  auto dims = small_dims();
  WorldModel wm(dims, 31);
  Rng rng(32, "starts");
  const int n = 2, d_obs = 6;
  std::vector<ImaginationStart> starts(3);
  for (auto& st : starts) {
    for (int i = 0; i < n * dims.det; ++i) st.h.push_back(float(rng.uniform(-0.5, 0.5)));
    for (int i = 0; i < n * dims.stoch; ++i) st.z.push_back(float(rng.uniform(-0.5, 0.5)));
    for (int i = 0; i < n * d_obs; ++i) st.real_obs.push_back(float(rng.uniform(-1, 1)));
    st.prev_action.assign(n, 0);
  }

  ScriptedActor actor;
  Rng noise_a(33, "nz");
  auto one = imagine(wm, starts, actor, 1, n, d_obs, noise_a);
  CHECK(one.policy_inputs.size() == 1);
  CHECK(one.actions.size() == 1);
  CHECK(one.rewards.size() == 1);
  CHECK(int(one.actions[0].size()) == 3 * n);
  CHECK(one.source == "imagined");

  ScriptedActor a1, a2;
  Rng nz1(34, "nz"), nz2(34, "nz");
  auto r1 = imagine(wm, starts, a1, 5, n, d_obs, nz1);
  auto r2 = imagine(wm, starts, a2, 5, n, d_obs, nz2);
  for (int t = 0; t < 5; ++t) {
    CHECK(r1.rewards[t] == r2.rewards[t]);
    CHECK(r1.latent_h[t] == r2.latent_h[t]);
  }
}

TEST_CASE("open_loop_predict: full prefix reduces to filtering; untrained output is finite") {
  auto dims = small_dims();
  WorldModel wm(dims, 35);
  EnvConfig cfg;
  cfg.n_agents = 3;
  ParticleEnv env(cfg);
  Episode ep = roll_episode(env, 600);

  std::vector<std::vector<std::vector<float>>> obs;
  std::vector<std::vector<int>> actions;
  for (int t = 0; t <= ep.steps; ++t) obs.push_back(ep.obs_rows(t));
  obs.resize(ep.steps);  // predict over the 25 recorded steps
  for (int t = 0; t < ep.steps - 1; ++t) actions.push_back(ep.joint_action(t));

  auto pred = open_loop_predict(wm, obs, actions, 5, ep.n_agents);
  REQUIRE(int(pred.size()) == ep.n_agents);
  REQUIRE(int(pred[0].size()) == ep.steps);
  for (const auto& agent : pred)
    for (const auto& row : agent)
      for (float v : row) CHECK(std::isfinite(v));

  auto filtered = open_loop_predict(wm, obs, actions, ep.steps, ep.n_agents);
  // the prefix part is identical; beyond the prefix they may differ
  for (int i = 0; i < ep.n_agents; ++i)
    for (int t = 0; t < 5; ++t) CHECK(pred[i][t] == filtered[i][t]);

  CHECK_THROWS_AS(open_loop_predict(wm, obs, actions, 0, ep.n_agents), std::invalid_argument);
}
