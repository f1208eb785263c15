// Serial vs OpenMP kernel comparison, plus one model-scale training step.
// Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "tocm/config.hpp"
#include "tocm/kernels.hpp"
#include "tocm/replay.hpp"
#include "tocm/rng.hpp"
#include "tocm/world_model.hpp"

using namespace tocm;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<float> random_mat(Rng& rng, int r, int c) {
  std::vector<float> m(size_t(r) * c);
  for (auto& x : m) x = float(rng.uniform(-1, 1));
  return m;
}

void bench_matmul(int m, int k, int n, int repeats) {
  Rng rng(1, "bench");
  auto a = random_mat(rng, m, k);
  auto b = random_mat(rng, k, n);
  std::vector<float> c(size_t(m) * n);

  const double flops = 2.0 * m * k * n * repeats;
  kernels::set_parallel(false);
  auto t0 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
  const double serial = seconds_since(t0);

  kernels::set_parallel(true);
  t0 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
  const double parallel = seconds_since(t0);

  std::printf("matmul %4dx%4dx%4d  serial %7.2f GFLOP/s  parallel %7.2f GFLOP/s  speedup %.2fx\n",
              m, k, n, flops / serial / 1e9, flops / parallel / 1e9, serial / parallel);
}

void bench_model_step(int repeats) {
  TrainConfig cfg;
  cfg.task = "coop";
  auto dims = make_model_dims(cfg);
  WorldModel wm(dims, 7);
  EnvConfig env_cfg = make_env_config(cfg);
  ParticleEnv env(env_cfg);

  std::vector<Episode> eps;
  Rng act_rng(3, "bench-actions");
  for (int e = 0; e < 16; ++e) {
    Episode ep;
    ep.n_agents = env_cfg.n_agents;
    ep.d_obs = env_cfg.obs_dim();
    ep.steps = env_cfg.max_steps;
    auto obs = env.reset(100 + e);
    for (const auto& o : obs) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
    while (!env.done()) {
      JointAction act;
      for (int i = 0; i < ep.n_agents; ++i) act.push_back(act_rng.uniform_int(kNumActions));
      auto r = env.step(act);
      ep.actions.insert(ep.actions.end(), act.begin(), act.end());
      ep.rewards.push_back(r.reward);
      for (const auto& o : r.observations) ep.obs.insert(ep.obs.end(), o.begin(), o.end());
    }
    eps.push_back(std::move(ep));
  }
  std::vector<const Episode*> ptrs;
  for (auto& e : eps) ptrs.push_back(&e);
  auto batch = build_sequence_batch(ptrs, dims);
  AdamT<float> opt(wm.params(), 3e-4f, 100.0f);
  Rng noise(4, "bench-noise");

  for (bool parallel : {false, true}) {
    kernels::set_parallel(parallel);
    auto t0 = Clock::now();
    for (int r = 0; r < repeats; ++r) {
      auto parts = wm.model_loss(batch, noise);
      backward(parts.total);
      opt.step();
    }
    const double dt = seconds_since(t0) / repeats;
    std::printf("model gradient step (16 episodes x 3 agents, %s): %7.1f ms\n",
                parallel ? "OpenMP" : "serial", dt * 1e3);
  }
  kernels::set_parallel(true);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 50;
  bench_matmul(48, 128, 128, repeats * 20);
  bench_matmul(432, 128, 128, repeats * 5);
  bench_matmul(1536, 128, 128, repeats);
  bench_matmul(512, 512, 512, std::max(1, repeats / 10));
  bench_model_step(std::max(1, repeats / 10));
  return 0;
}
