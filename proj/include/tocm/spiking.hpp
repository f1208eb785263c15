#pragma once

// Leaky integrate-and-fire actor. Inputs are injected as a constant current
// for a fixed simulation window through two LIF layers; action logits are
// the mean spike count of five output populations. The hard spike step is
// trained with a rectangular-window surrogate gradient.

#include <utility>

#include "tocm/policy.hpp"

namespace tocm {

struct LifParams {
  float decay = 0.5f;        // membrane leak in (0,1)
  float threshold = 1.0f;    // V_th
  int window = 8;            // simulation steps per decision
  float surrogate_width = 0.5f;
};

// Pseudo-derivative of the spike step at u = v_pre - V_th.
inline float surrogate_grad(float u, float width) {
  return std::abs(u) < width ? 1.0f / (2.0f * width) : 0.0f;
}

// v_pre = decay*v + input; spike = [v_pre >= V_th]; v' = v_pre - spike*V_th.
// smooth=true replaces the step with the ramp the surrogate is exact for.
inline std::pair<Tensor, Tensor> lif_step(const Tensor& v, const Tensor& input_current,
                                          const LifParams& p, bool smooth = false) {
  auto v_pre = add(scale(v, p.decay), input_current);
  auto spike = spike_t(add_const(v_pre, -p.threshold), p.surrogate_width, smooth);
  auto v_next = sub(v_pre, scale(spike, p.threshold));
  return {v_next, spike};
}

class SpikingActor : public ActorNet {
 public:
  SpikingActor(const PolicyConfig& cfg, uint64_t seed)
      : cfg_(cfg), lif_{cfg.snn_decay, cfg.snn_threshold, cfg.snn_window,
                        cfg.snn_surrogate_width} {
    Rng rng(seed, "init/actor");
    const int out = 5 * cfg.snn_population;
    w1_ = store_.add("actor/w1", init_linear<float>(rng, cfg.input_dim, cfg.hidden));
    b1_ = store_.add("actor/b1", Tensor::full({1, cfg.hidden}, 0.5f * cfg.snn_threshold));
    w2_ = store_.add("actor/w2", init_linear<float>(rng, cfg.hidden, out));
    b2_ = store_.add("actor/b2", Tensor::full({1, out}, 0.5f * cfg.snn_threshold));
    // Half-threshold bias keeps membranes inside the surrogate window at
    // init; zero-bias LIF layers are silent and receive no gradient.
  }

  // Population spike rates in [0, 1], one per action.
  Tensor spike_logits(const Tensor& x, bool smooth = false) {
    const int rows = x.rows();
    const int out = 5 * cfg_.snn_population;
    auto current1 = affine(x, w1_, b1_);
    auto v1 = Tensor::zeros({rows, cfg_.hidden});
    auto v2 = Tensor::zeros({rows, out});
    Tensor acc;
    for (int t = 0; t < lif_.window; ++t) {
      auto [v1n, s1] = lif_step(v1, current1, lif_, smooth);
      v1 = v1n;
      auto [v2n, s2] = lif_step(v2, affine(s1, w2_, b2_), lif_, smooth);
      v2 = v2n;
      acc = acc.defined() ? add(acc, s2) : s2;
    }
    std::vector<Tensor> pops;
    const float norm = 1.0f / float(cfg_.snn_population * lif_.window);
    for (int a = 0; a < 5; ++a)
      pops.push_back(scale(
          rowsum(slice_cols(acc, a * cfg_.snn_population, (a + 1) * cfg_.snn_population)), norm));
    return concat_cols<float>(std::span<const Tensor>(pops));
  }

  // Spike rates are bounded by [0,1]; a fixed gain widens them so the
  // categorical head can commit to an action.
  Tensor logits(const Tensor& x) override { return scale(spike_logits(x), cfg_.snn_logit_gain); }

  ParamStore& params() override { return store_; }
  const ParamStore& params() const override { return store_; }

  const LifParams& lif() const { return lif_; }
  LifParams& lif_mut() { return lif_; }

 private:
  PolicyConfig cfg_;
  LifParams lif_;
  ParamStore store_;
  Tensor w1_, b1_, w2_, b2_;
};

}  // namespace tocm
