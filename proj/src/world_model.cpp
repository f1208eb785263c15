#include "tocm/world_model.hpp"

#include <cmath>
#include <stdexcept>

namespace tocm {

namespace {

void check_finite(const std::vector<float>& v, const char* what) {
  for (float x : v)
    if (!std::isfinite(x)) throw std::runtime_error(std::string(what) + ": non-finite latent");
}

std::vector<float> slice_obs_rows(const Tensor& padded, int d_obs) {
  const int rows = padded.rows();
  std::vector<float> out(size_t(rows) * d_obs);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < d_obs; ++j) out[size_t(i) * d_obs + j] = padded.at(i, j);
  return out;
}

}  // namespace

Tensor make_obs_id_rows(const ModelDims& dims, const std::vector<std::vector<float>>& obs) {
  const int n = int(obs.size());
  std::vector<float> rows(size_t(n) * dims.enc_in(), 0.0f);
  for (int i = 0; i < n; ++i) {
    if (int(obs[i].size()) > dims.pad_obs)
      throw std::invalid_argument("observation wider than pad_obs; raise model.pad_obs");
    float* dst = rows.data() + size_t(i) * dims.enc_in();
    for (size_t j = 0; j < obs[i].size(); ++j) dst[j] = obs[i][j];
    dst[dims.pad_obs + i] = 1.0f;  // identity one-hot
  }
  return Tensor::from({n, dims.enc_in()}, std::move(rows));
}

std::vector<float> make_joint_action(const ModelDims& dims, const std::vector<int>& action) {
  if (int(action.size()) > dims.pad_agents)
    throw std::invalid_argument("joint action wider than pad_agents");
  std::vector<float> row(dims.act_dim(), 0.0f);
  for (size_t i = 0; i < action.size(); ++i) row[i * kNumActions + action[i]] = 1.0f;
  return row;
}

int policy_input_dim(const ModelDims& dims) { return 2 * dims.pad_obs + 1 + dims.pad_agents; }

void write_policy_input(const ModelDims& dims, std::span<const float> obs,
                        std::span<const float> pred_obs, float pred_rew, int agent_idx,
                        float* dst) {
  const int d = policy_input_dim(dims);
  for (int j = 0; j < d; ++j) dst[j] = 0.0f;
  for (size_t j = 0; j < obs.size(); ++j) dst[j] = obs[j];
  for (size_t j = 0; j < pred_obs.size(); ++j) dst[dims.pad_obs + j] = pred_obs[j];
  dst[2 * dims.pad_obs] = pred_rew;
  dst[2 * dims.pad_obs + 1 + agent_idx] = 1.0f;
}

ImaginedRollout imagine(WorldModel& wm, const std::vector<ImaginationStart>& starts,
                        ImaginationActor& actor, int horizon, int n_agents, int d_obs,
                        Rng& noise_rng) {
  if (horizon < 1) throw std::invalid_argument("imagine: horizon must be >= 1");
  if (starts.empty()) throw std::invalid_argument("imagine: no starting latents");
  const ModelDims& dims = wm.dims();
  const int n_starts = int(starts.size());
  const int rows = n_starts * n_agents;
  const int in_dim = policy_input_dim(dims);

  ImaginedRollout out;
  out.n_starts = n_starts;
  out.horizon = horizon;
  out.n_agents = n_agents;
  out.input_dim = in_dim;
  out.d_obs = d_obs;

  std::vector<float> hv(size_t(rows) * dims.det), zv(size_t(rows) * dims.stoch);
  std::vector<float> cur_obs(size_t(rows) * d_obs);
  std::vector<float> prev_act(size_t(rows) * dims.act_dim());
  for (int s = 0; s < n_starts; ++s) {
    const auto& st = starts[s];
    std::copy(st.h.begin(), st.h.end(), hv.begin() + size_t(s) * n_agents * dims.det);
    std::copy(st.z.begin(), st.z.end(), zv.begin() + size_t(s) * n_agents * dims.stoch);
    std::copy(st.real_obs.begin(), st.real_obs.end(),
              cur_obs.begin() + size_t(s) * n_agents * d_obs);
    auto joint = make_joint_action(dims, st.prev_action);
    for (int i = 0; i < n_agents; ++i)
      std::copy(joint.begin(), joint.end(),
                prev_act.begin() + (size_t(s) * n_agents + i) * dims.act_dim());
  }
  check_finite(hv, "imagine");
  check_finite(zv, "imagine");

  auto h = Tensor::from({rows, dims.det}, hv);
  auto z = Tensor::from({rows, dims.stoch}, zv);
  auto prev = Tensor::from({rows, dims.act_dim()}, prev_act);

  for (int step = 0; step < horizon; ++step) {
    // What the policy sees: the current (imagined) observation plus the
    // one-step prediction obtained by advancing with the previous action.
    auto h_pred = wm.advance(h, z, prev);
    auto z_pred = wm.prior(h_pred).mean;
    auto obs_pred = wm.decode_obs(h_pred, z_pred);
    auto rew_pred = wm.decode_reward(h_pred, z_pred);

    std::vector<float> inputs(size_t(rows) * in_dim);
    for (int r = 0; r < rows; ++r) {
      std::vector<float> po(d_obs);
      for (int j = 0; j < d_obs; ++j) po[j] = obs_pred.at(r, j);
      write_policy_input(dims,
                         std::span<const float>(cur_obs.data() + size_t(r) * d_obs, d_obs), po,
                         rew_pred.at(r, 0), r % n_agents, inputs.data() + size_t(r) * in_dim);
    }

    std::vector<int> actions;
    std::vector<float> logp, values;
    actor.act(inputs, rows, in_dim, actions, logp, values);

    std::vector<float> joint_rows(size_t(rows) * dims.act_dim());
    for (int s = 0; s < n_starts; ++s) {
      std::vector<int> joint_idx(actions.begin() + size_t(s) * n_agents,
                                 actions.begin() + size_t(s + 1) * n_agents);
      auto joint = make_joint_action(dims, joint_idx);
      for (int i = 0; i < n_agents; ++i)
        std::copy(joint.begin(), joint.end(),
                  joint_rows.begin() + (size_t(s) * n_agents + i) * dims.act_dim());
    }
    auto joint = Tensor::from({rows, dims.act_dim()}, joint_rows);

    auto h_next = wm.advance(h, z, joint);
    auto z_next = sample_gaussian(wm.prior(h_next),
                                  WorldModel::normal_noise(rows, dims.stoch, noise_rng));
    auto rew = wm.decode_reward(h_next, z_next);

    out.policy_inputs.push_back(std::move(inputs));
    out.actions.push_back(std::move(actions));
    out.logp.push_back(std::move(logp));
    out.values.push_back(std::move(values));
    out.decoded_obs.push_back(cur_obs);
    out.latent_h.push_back(h.data());
    out.latent_z.push_back(z.data());
    std::vector<float> shared(n_starts);
    for (int s = 0; s < n_starts; ++s) {
      double acc = 0;
      for (int i = 0; i < n_agents; ++i) acc += rew.at(s * n_agents + i, 0);
      shared[s] = float(acc / n_agents);
    }
    out.rewards.push_back(std::move(shared));

    h = detach(h_next);
    z = detach(z_next);
    check_finite(h.data(), "imagine");
    prev = joint;
    cur_obs = slice_obs_rows(wm.decode_obs(h, z), d_obs);
  }

  // Bootstrap values for the state after the last transition.
  auto h_pred = wm.advance(h, z, prev);
  auto z_pred = wm.prior(h_pred).mean;
  auto obs_pred = wm.decode_obs(h_pred, z_pred);
  auto rew_pred = wm.decode_reward(h_pred, z_pred);
  std::vector<float> inputs(size_t(rows) * in_dim);
  for (int r = 0; r < rows; ++r) {
    std::vector<float> po(d_obs);
    for (int j = 0; j < d_obs; ++j) po[j] = obs_pred.at(r, j);
    write_policy_input(dims, std::span<const float>(cur_obs.data() + size_t(r) * d_obs, d_obs),
                       po, rew_pred.at(r, 0), r % n_agents, inputs.data() + size_t(r) * in_dim);
  }
  actor.values_only(inputs, rows, in_dim, out.bootstrap_values);
  return out;
}

std::vector<std::vector<std::vector<float>>> open_loop_predict(
    WorldModel& wm, const std::vector<std::vector<std::vector<float>>>& obs,
    const std::vector<std::vector<int>>& actions, int prefix_len, int n_agents) {
  const int steps = int(obs.size());
  if (prefix_len < 1) throw std::invalid_argument("open_loop_predict: empty prefix");
  if (steps < 1) throw std::invalid_argument("open_loop_predict: no observations");
  if (int(actions.size()) + 1 < steps)
    throw std::invalid_argument("open_loop_predict: need an action for every transition");
  const ModelDims& dims = wm.dims();
  const int d_obs = int(obs[0][0].size());

  std::vector<std::vector<std::vector<float>>> pred(
      n_agents, std::vector<std::vector<float>>(steps, std::vector<float>(d_obs)));

  auto h = Tensor::zeros({n_agents, dims.det});
  Tensor z;
  for (int t = 0; t < steps; ++t) {
    if (t > 0) {
      auto joint = make_joint_action(dims, actions[t - 1]);
      std::vector<float> rows(size_t(n_agents) * dims.act_dim());
      for (int i = 0; i < n_agents; ++i)
        std::copy(joint.begin(), joint.end(), rows.begin() + size_t(i) * dims.act_dim());
      h = detach(wm.advance(h, z, Tensor::from({n_agents, dims.act_dim()}, rows)));
    }
    if (t < prefix_len) {
      auto s = wm.encode(make_obs_id_rows(dims, obs[t]));
      z = detach(wm.posterior(h, s).mean);
    } else {
      z = detach(wm.prior(h).mean);
    }
    auto decoded = wm.decode_obs(h, z);
    for (int i = 0; i < n_agents; ++i)
      for (int j = 0; j < d_obs; ++j) pred[i][t][j] = decoded.at(i, j);
  }
  return pred;
}

}  // namespace tocm
