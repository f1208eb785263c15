// Acceptance suite: one pass/fail line per criterion.
//
// Training runs execute through the command-line binary and are cached under
// --runs-dir keyed by name + exact config; re-running the suite reuses
// finished runs and only validates them.
//
// Usage: acceptance --bin <tocm> --runs-dir <dir> [--criterion N]

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "tocm/checkpoint.hpp"
#include "tocm/config.hpp"
#include "tocm/replay.hpp"
#include "tocm/trainer.hpp"

namespace fs = std::filesystem;
using namespace tocm;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_bin;
std::string g_runs_dir;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- run management ---

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  int col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return int(i);
    throw std::runtime_error("metrics column missing: " + name);
  }
};

MetricsTable read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  MetricsTable t;
  std::string line;
  std::getline(in, line);
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) t.columns.push_back(c);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    for (std::string c; std::getline(ls, c, ',');) row.push_back(std::stod(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

double final_reward_mean(const MetricsTable& t, size_t window = 10) {
  const int c = t.col("episode_reward_mean");
  const size_t n = std::min(window, t.rows.size());
  double acc = 0;
  for (size_t i = t.rows.size() - n; i < t.rows.size(); ++i) acc += t.rows[i][c];
  return acc / double(n);
}

// Training runs execute through the CLI and are cached; missing runs launch
// two at a time, each pinned to one OpenMP thread.
struct RunSpec {
  std::string name;
  TrainConfig cfg;
  std::string transfer_source;
};

std::vector<std::string> ensure_runs(const std::vector<RunSpec>& specs) {
  fs::create_directories(g_runs_dir);
  std::vector<std::string> dirs;
  std::vector<const RunSpec*> pending;
  for (const auto& spec : specs) {
    const fs::path dir = fs::path(g_runs_dir) / spec.name;
    dirs.push_back(dir.string());
    if (fs::exists(dir / "final.tocm") &&
        read_file(dir / "config.cfg") == emit_config(spec.cfg))
      continue;
    fs::remove_all(dir);
    pending.push_back(&spec);
  }

  auto command_for = [&](const RunSpec& spec) {
    const fs::path dir = fs::path(g_runs_dir) / spec.name;
    const fs::path cfg_path = fs::path(g_runs_dir) / (spec.name + ".cfg");
    std::ofstream out(cfg_path, std::ios::binary);
    out << emit_config(spec.cfg);
    out.close();
    std::string cmd = "OMP_NUM_THREADS=1 " + g_bin;
    cmd += spec.transfer_source.empty() ? " train" : " transfer --source " + spec.transfer_source;
    cmd += " --config " + cfg_path.string() + " --out-dir " + dir.string() + " > " +
           (dir.string() + ".log") + " 2>&1";
    return cmd;
  };

  for (size_t i = 0; i < pending.size(); i += 2) {
    std::string shell;
    if (i + 1 < pending.size()) {
      std::printf("  [running] %s + %s\n", pending[i]->name.c_str(),
                  pending[i + 1]->name.c_str());
      shell = "( " + command_for(*pending[i]) + " ) & ( " + command_for(*pending[i + 1]) +
              " ); wait";
    } else {
      std::printf("  [running] %s\n", pending[i]->name.c_str());
      shell = command_for(*pending[i]);
    }
    std::fflush(stdout);
    std::system(("sh -c '" + shell + "'").c_str());
  }

  for (const auto& spec : specs) {
    const fs::path dir = fs::path(g_runs_dir) / spec.name;
    if (!fs::exists(dir / "final.tocm") ||
        read_file(dir / "config.cfg") != emit_config(spec.cfg))
      throw std::runtime_error("training run failed: " + spec.name + " (see " + dir.string() +
                               ".log)");
  }
  return dirs;
}

std::string ensure_run(const std::string& name, const TrainConfig& cfg,
                       const std::string& transfer_source = "") {
  return ensure_runs({RunSpec{name, cfg, transfer_source}})[0];
}

TrainConfig nav_config(const std::string& task, int agents, long long steps, long long seed) {
  TrainConfig cfg;
  cfg.task = task;
  cfg.n_agents = agents;
  cfg.total_env_steps = steps;
  cfg.seed = seed;
  return cfg;
}

float random_policy_reward(const std::string& task, int agents, int episodes, uint64_t seed) {
  EnvConfig env_cfg;
  env_cfg.task = parse_task(task);
  env_cfg.n_agents = agents;
  ParticleEnv env(env_cfg);
  Rng rng(seed, "random-baseline");
  double acc = 0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng.next_u64());
    float total = 0;
    while (!env.done()) {
      JointAction a;
      for (int i = 0; i < agents; ++i) a.push_back(rng.uniform_int(kNumActions));
      total += env.step(a).reward;
    }
    acc += total;
  }
  return float(acc / episodes);
}

// --- criterion 1: numerics ---

template <typename F>
double run_layer_check(F&& build, uint64_t seed) {
  return build(seed);
}

double check_affine(uint64_t seed);
double check_gru(uint64_t seed);
double check_attention(uint64_t seed);
double check_huber(uint64_t seed);
double check_kl(uint64_t seed);
double check_sample(uint64_t seed);
double check_softmax(uint64_t seed);

template <typename T>
TensorT<T> rand_t(Rng& rng, std::vector<int> shape, double lo = -1, double hi = 1) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<T> v(static_cast<size_t>(n));
  for (auto& x : v) x = T(rng.uniform(lo, hi));
  return TensorT<T>::from(std::move(shape), std::move(v));
}

using DT = TensorT<double>;

double check_affine(uint64_t seed) {
  Rng rng(seed, "acc-affine");
  auto x = rand_t<double>(rng, {2, 3});
  auto w = rand_t<double>(rng, {3, 4});
  auto b = rand_t<double>(rng, {1, 4});
  std::vector<DT> in{x, w, b};
  return grad_check<double>([&] { return mean_all(elu_t(affine(x, w, b))); }, in, 1e-4);
}

double check_gru(uint64_t seed) {
  Rng rng(seed, "acc-gru");
  ParamStoreT<double> store;
  auto p = GruParamsT<double>::create(store, "g", 3, 4, rng);
  auto x = rand_t<double>(rng, {2, 3});
  auto h = rand_t<double>(rng, {2, 4});
  std::vector<DT> in{x, h};
  for (auto& [n, t] : store.items()) in.push_back(t);
  return grad_check<double>([&] { return mean_all(gru_cell(x, h, p)); }, in, 1e-4);
}

double check_attention(uint64_t seed) {
  Rng rng(seed, "acc-attn");
  auto q = rand_t<double>(rng, {2, 3});
  auto k = rand_t<double>(rng, {4, 3});
  auto v = rand_t<double>(rng, {4, 2});
  auto w = rand_t<double>(rng, {2, 2});
  std::vector<DT> in{q, k, v};
  return grad_check<double>([&] { return mean_all(mul(scaled_dot_attention(q, k, v), w)); }, in,
                            1e-4);
}

double check_huber(uint64_t seed) {
  Rng rng(seed, "acc-huber");
  DT pred, target;
  while (true) {
    pred = rand_t<double>(rng, {2, 3}, -2, 2);
    target = rand_t<double>(rng, {2, 3}, -2, 2);
    bool near = false;
    for (int i = 0; i < 6; ++i)
      if (std::abs(std::abs(pred.data()[i] - target.data()[i]) - 1.0) < 1e-2) near = true;
    if (!near) break;
  }
  std::vector<DT> in{pred};
  return grad_check<double>([&] { return huber(pred, target); }, in, 1e-4);
}

double check_kl(uint64_t seed) {
  Rng rng(seed, "acc-kl");
  auto mq = rand_t<double>(rng, {2, 3});
  auto rq = rand_t<double>(rng, {2, 3});
  auto mp = rand_t<double>(rng, {2, 3});
  auto rp = rand_t<double>(rng, {2, 3});
  std::vector<DT> in{mq, rq, mp, rp};
  return grad_check<double>(
      [&] {
        GaussianParamsT<double> q{mq, add_const(softplus_t(rq), 0.1)};
        GaussianParamsT<double> p{mp, add_const(softplus_t(rp), 0.1)};
        return gaussian_kl(q, p);
      },
      in, 1e-4);
}

double check_sample(uint64_t seed) {
  Rng rng(seed, "acc-sample");
  auto m = rand_t<double>(rng, {2, 3});
  auto r = rand_t<double>(rng, {2, 3});
  auto noise = rand_t<double>(rng, {2, 3});
  std::vector<DT> in{m, r};
  return grad_check<double>(
      [&] {
        GaussianParamsT<double> g{m, add_const(softplus_t(r), 0.1)};
        auto s = sample_gaussian(g, noise);
        return mean_all(mul(s, s));
      },
      in, 1e-4);
}

double check_softmax(uint64_t seed) {
  Rng rng(seed, "acc-softmax");
  auto x = rand_t<double>(rng, {2, 5}, -2, 2);
  auto w = rand_t<double>(rng, {2, 5});
  std::vector<DT> in{x};
  return grad_check<double>([&] { return mean_all(mul(softmax_rows(x), w)); }, in, 1e-4);
}

Outcome criterion_1() {
  const auto t0 = Clock::now();
  double worst = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    worst = std::max({worst, check_affine(seed), check_gru(seed), check_attention(seed),
                      check_huber(seed), check_kl(seed), check_sample(seed),
                      check_softmax(seed)});
  }
  if (worst >= 1e-4) return {false, "grad check max relative error " + std::to_string(worst)};

  // KL vs Monte-Carlo
  GaussianParams q{Tensor::scalar(0.0f), Tensor::scalar(2.0f)};
  GaussianParams p{Tensor::scalar(0.0f), Tensor::scalar(1.0f)};
  const double closed = double(gaussian_kl(q, p).item());
  Rng rng(77, "acc-kl-mc");
  double acc = 0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * rng.normal();
    acc += (-std::log(2.0) - x * x / 8.0) - (-x * x / 2.0);
  }
  const double mc = acc / n;
  if (std::abs(closed - mc) / std::abs(mc) >= 0.02)
    return {false, "KL closed form " + std::to_string(closed) + " vs MC " + std::to_string(mc)};

  // Huber piecewise values, exact
  auto hb = [](float e) { return huber(Tensor::scalar(e), Tensor::scalar(0.0f)).item(); };
  if (hb(0.0f) != 0.0f || hb(0.5f) != 0.125f || hb(1.0f) != 0.5f || hb(3.0f) != 2.5f)
    return {false, "Huber piecewise values off"};

  const double dt = seconds_since(t0);
  if (dt >= 60.0) return {false, "numerics suite too slow: " + std::to_string(dt) + "s"};
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "grad err %.2e, KL %.4f vs MC %.4f, Huber exact, %.1fs", worst, closed, mc, dt);
  return {true, buf};
}

// --- criterion 2: world-model overfit ---

float filtered_obs_mae(WorldModel& wm, const std::vector<Episode>& eps) {
  const auto& dims = wm.dims();
  double acc = 0;
  int64_t count = 0;
  for (const auto& ep : eps) {
    auto h = Tensor::zeros({ep.n_agents, dims.det});
    Tensor z;
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
  }
  return float(acc / count);
}

Outcome criterion_2() {
  const auto t0 = Clock::now();
  TrainConfig cfg = nav_config("coop", 3, 1, 17);
  auto dims = make_model_dims(cfg);
  auto env_cfg = make_env_config(cfg);
  ParticleEnv env(env_cfg);
  Rng act_rng(17, "acc-c2-actions");

  std::vector<Episode> eps;
  for (int e = 0; e < 10; ++e) {
    Episode ep;
    ep.n_agents = 3;
    ep.d_obs = env_cfg.obs_dim();
    ep.steps = env_cfg.max_steps;
    auto obs = env.reset(1000 + e);
    for (const auto& o : obs) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
    while (!env.done()) {
      JointAction a;
      for (int i = 0; i < 3; ++i) a.push_back(act_rng.uniform_int(kNumActions));
      auto r = env.step(a);
      ep.actions.insert(ep.actions.end(), a.begin(), a.end());
      ep.rewards.push_back(r.reward);
      for (const auto& o : r.observations) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
    }
    eps.push_back(std::move(ep));
  }
  std::vector<const Episode*> ptrs;
  for (auto& e : eps) ptrs.push_back(&e);
  auto batch = build_sequence_batch(ptrs, dims);

  WorldModel wm(dims, 17);
  AdamT<float> opt(wm.params(), float(cfg.model_lr), float(cfg.model_grad_clip));
  Rng noise(18, "acc-c2-noise");
  std::vector<double> losses;
  for (int step = 0; step < 2000; ++step) {
    auto parts = wm.model_loss(batch, noise);
    losses.push_back(parts.total_value);
    backward(parts.total);
    opt.step();
  }

  // windowed means must keep decreasing across any 200-step offset
  const int w = 200;
  std::vector<double> window_mean(losses.size() - w + 1);
  double acc = 0;
  for (int i = 0; i < w; ++i) acc += losses[i];
  window_mean[0] = acc / w;
  for (size_t i = 1; i < window_mean.size(); ++i) {
    acc += losses[i + w - 1] - losses[i - 1];
    window_mean[i] = acc / w;
  }
  int violations = 0;
  for (size_t i = 0; i + w < window_mean.size(); ++i)
    if (window_mean[i + w] >= window_mean[i]) ++violations;

  const float mae = filtered_obs_mae(wm, eps);
  const double dt = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "loss %.4f -> %.4f, %d window violations, obs MAE %.4f, %.0fs", losses.front(),
                losses.back(), violations, mae, dt);
  return {violations == 0 && mae < 0.05f && dt < 600.0, buf};
}

// --- criteria 3-7 share cached runs ---

RunSpec tocm_nav3_spec(int seed_idx) {
  return {"c4_tocm_nav3_s" + std::to_string(101 + seed_idx),
          nav_config("coop", 3, 300000, 101 + seed_idx), ""};
}

RunSpec ippo_nav3_spec(int seed_idx) {
  auto cfg = nav_config("coop", 3, 300000, 101 + seed_idx);
  cfg.algo = "ippo";
  return {"c4_ippo_nav3_s" + std::to_string(101 + seed_idx), cfg, ""};
}

std::string tocm_nav3_run(int seed_idx) {
  auto spec = tocm_nav3_spec(seed_idx);
  return ensure_run(spec.name, spec.cfg);
}

Outcome criterion_4() {
  std::vector<RunSpec> specs;
  for (int s = 0; s < 3; ++s) specs.push_back(tocm_nav3_spec(s));
  for (int s = 0; s < 3; ++s) specs.push_back(ippo_nav3_spec(s));
  auto dirs = ensure_runs(specs);

  double tocm_acc = 0, ippo_acc = 0;
  std::string detail;
  for (int s = 0; s < 3; ++s) {
    const double t_final = final_reward_mean(read_metrics(fs::path(dirs[s]) / "metrics.csv"));
    const double i_final =
        final_reward_mean(read_metrics(fs::path(dirs[3 + s]) / "metrics.csv"));
    tocm_acc += t_final;
    ippo_acc += i_final;
    detail += "seed" + std::to_string(101 + s) + ": tocm " + std::to_string(t_final) + " vs ippo " +
              std::to_string(i_final) + "; ";
  }
  const double tocm_avg = tocm_acc / 3, ippo_avg = ippo_acc / 3;
  const bool pass = ippo_avg < 0 ? tocm_avg >= 0.85 * ippo_avg : tocm_avg >= 1.15 * ippo_avg;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "avg tocm %.2f vs ippo %.2f (need >= %.2f)", tocm_avg, ippo_avg,
                ippo_avg < 0 ? 0.85 * ippo_avg : 1.15 * ippo_avg);
  return {pass, detail + buf};
}

Outcome criterion_3() {
  const auto run_dir = tocm_nav3_run(0);
  const auto ckpt = fs::path(run_dir) / "final.tocm";
  double err_acc = 0;
  int err_count = 0;
  for (int e = 0; e < 20; ++e) {
    const auto csv = fs::path(g_runs_dir) / ("c3_pred_" + std::to_string(e) + ".csv");
    const std::string cmd = g_bin + " predict --checkpoint " + ckpt.string() + " --seed " +
                            std::to_string(9000 + e) + " --prefix 5 --out " + csv.string() +
                            " > /dev/null 2>&1";
    if (WEXITSTATUS(std::system(cmd.c_str())) != 0) return {false, "predict invocation failed"};
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::stringstream ls(line);
      std::string cell;
      std::vector<double> row;
      while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
      // columns: agent, t, dim, real, predicted
      if (row[1] >= 5) {  // steps 6..25 in one-based counting
        err_acc += std::abs(row[3] - row[4]);
        ++err_count;
      }
    }
  }
  const double mae = err_acc / err_count;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "open-loop MAE %.4f over 20 episodes (need < 0.2)", mae);
  return {mae < 0.2, buf};
}

long long gradient_steps_to_obs_loss(const fs::path& metrics_csv, double threshold,
                                     int model_epochs) {
  auto t = read_metrics(metrics_csv);
  const int oc = t.col("obs_loss");
  const int ic = t.col("iteration");
  for (const auto& row : t.rows)
    if (row[oc] <= threshold) return (long long)(row[ic]) * model_epochs;
  return (long long)(t.rows.size()) * model_epochs + 1;  // never reached
}

Outcome criterion_5() {
  const auto source = fs::path(tocm_nav3_run(0)) / "final.tocm";
  std::vector<RunSpec> specs;
  for (int s = 0; s < 3; ++s) {
    auto cfg = nav_config("coop", 4, 60000, 201 + s);
    cfg.stop_at_obs_loss = 0.1;
    specs.push_back({"c5_scratch_nav4_s" + std::to_string(201 + s), cfg, ""});
    specs.push_back({"c5_transfer_nav4_s" + std::to_string(201 + s), cfg, source.string()});
  }
  auto dirs = ensure_runs(specs);

  double transfer_steps = 0, scratch_steps = 0;
  std::string detail;
  for (int s = 0; s < 3; ++s) {
    const int model_epochs = specs[2 * s].cfg.model_epochs;
    const auto ss =
        gradient_steps_to_obs_loss(fs::path(dirs[2 * s]) / "metrics.csv", 0.1, model_epochs);
    const auto ts =
        gradient_steps_to_obs_loss(fs::path(dirs[2 * s + 1]) / "metrics.csv", 0.1, model_epochs);
    transfer_steps += double(ts);
    scratch_steps += double(ss);
    detail += "s" + std::to_string(201 + s) + ": " + std::to_string(ts) + " vs " +
              std::to_string(ss) + "; ";
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "mean gradient steps to 0.1: transfer %.0f vs scratch %.0f",
                transfer_steps / 3, scratch_steps / 3);
  return {transfer_steps <= 0.5 * scratch_steps, detail + buf};
}

std::vector<RunSpec> nav2_specs() {
  std::vector<RunSpec> specs;
  for (int s = 0; s < 3; ++s) {
    auto dense_cfg = nav_config("coop", 2, 100000, 301 + s);
    auto spike_cfg = dense_cfg;
    spike_cfg.actor = "spiking";
    specs.push_back({"c6_dense_nav2_s" + std::to_string(301 + s), dense_cfg, ""});
    specs.push_back({"c6_spiking_nav2_s" + std::to_string(301 + s), spike_cfg, ""});
  }
  specs.push_back({"t300k_dense_nav2_s301", nav_config("coop", 2, 300000, 301), ""});
  return specs;
}

Outcome criterion_6() {
  const float random_mean = random_policy_reward("coop", 2, 200, 4242);
  auto dirs = ensure_runs(nav2_specs());
  double dense_acc = 0, spike_acc = 0;
  for (int s = 0; s < 3; ++s) {
    dense_acc += final_reward_mean(read_metrics(fs::path(dirs[2 * s]) / "metrics.csv"));
    spike_acc += final_reward_mean(read_metrics(fs::path(dirs[2 * s + 1]) / "metrics.csv"));
  }
  const double dense_improve = dense_acc / 3 - random_mean;
  const double spike_improve = spike_acc / 3 - random_mean;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "random %.2f, dense %.2f (gain %.2f), spiking %.2f (gain %.2f, need >= %.2f)",
                random_mean, dense_acc / 3, dense_improve, spike_acc / 3, spike_improve,
                0.8 * dense_improve);
  return {dense_improve > 0 && spike_improve >= 0.8 * dense_improve, buf};
}

Outcome trainer_example_coop2() {
  const float random_mean = random_policy_reward("coop", 2, 200, 4242);
  const auto dir = ensure_runs(nav2_specs()).back();
  const double final_mean = final_reward_mean(read_metrics(fs::path(dir) / "metrics.csv"));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "300K coop-2 final %.2f vs random %.2f (need >= %.2f)",
                final_mean, random_mean, random_mean / 2);
  return {final_mean >= random_mean / 2, buf};
}

Outcome criterion_7() {
  auto cfg = nav_config("coop", 3, 2500, 55);
  auto dirs = ensure_runs({RunSpec{"c7_det_a", cfg, ""}, RunSpec{"c7_det_b", cfg, ""}});
  const bool same = read_file(fs::path(dirs[0]) / "metrics.csv") ==
                    read_file(fs::path(dirs[1]) / "metrics.csv");
  return {same, same ? "metrics byte-identical across two seeded runs"
                     : "metrics differ between identical runs"};
}

Outcome criterion_8() {
  ModelDims dims;  // padded family defaults
  WorldModel wm2(dims, 1), wm3(dims, 2), wm4(dims, 3);
  const auto c2 = wm2.params().scalar_count();
  const auto c3 = wm3.params().scalar_count();
  const auto c4 = wm4.params().scalar_count();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "parameter count %lld for 2, 3 and 4 agents",
                static_cast<long long>(c2));
  return {c2 == c3 && c3 == c4, buf};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  int only = 0;
  app.add_option("--bin", g_bin, "tocm binary")->required();
  app.add_option("--runs-dir", g_runs_dir, "cache directory for training runs")->required();
  app.add_option("--criterion", only, "run a single criterion (1-8)");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(g_runs_dir);

  struct Item {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  // ordered so heavy runs are produced once and reused
  const std::vector<Item> items = {
      {1, "numerics", criterion_1},
      {8, "parameter-invariance", criterion_8},
      {7, "determinism", criterion_7},
      {2, "world-model-overfit", criterion_2},
      {4, "cooperation-gain", criterion_4},
      {3, "open-loop-prediction", criterion_3},
      {5, "transfer", criterion_5},
      {6, "spiking-parity", criterion_6},
  };

  int failures = 0;
  for (const auto& item : items) {
    if (only != 0 && item.id != only) continue;
    Outcome out;
    try {
      out = item.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion-%d %-22s %s  (%s)\n", item.id, item.name,
                out.pass ? "PASS" : "FAIL", out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }

  if (only == 0 || only == 6) {
    Outcome extra;
    try {
      extra = trainer_example_coop2();
    } catch (const std::exception& e) {
      extra = {false, std::string("exception: ") + e.what()};
    }
    std::printf("trainer-example coop2-vs-random      %s  (%s)\n",
                extra.pass ? "PASS" : "FAIL", extra.detail.c_str());
    if (!extra.pass) ++failures;
  }

  return failures;
}
