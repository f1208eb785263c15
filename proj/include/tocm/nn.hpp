#pragma once

// Network building blocks on top of the tensor graph: named parameter
// collections, the layer primitives the model is assembled from, the loss
// primitives, Adam, and a finite-difference gradient checker.

#include <cstring>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tocm/rng.hpp"
#include "tocm/tensor.hpp"

namespace tocm {

template <typename T>
struct GaussianParamsT {
  TensorT<T> mean;
  TensorT<T> stddev;  // strictly positive
};

using GaussianParams = GaussianParamsT<float>;

// --- parameter store ---

template <typename T>
class ParamStoreT {
 public:
  TensorT<T>& add(const std::string& name, TensorT<T> t) {
    if (index_.count(name)) throw std::invalid_argument("param exists: " + name);
    t.mark_param();
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  TensorT<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("no such param: " + name);
    return items_[it->second].second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<std::pair<std::string, TensorT<T>>>& items() { return items_; }
  const std::vector<std::pair<std::string, TensorT<T>>>& items() const { return items_; }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : items_) {
      auto& g = t.node()->grad;
      g.assign(t.data().size(), T(0));
    }
  }

  uint64_t value_hash() const {
    uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const void* p, size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
      }
    };
    for (const auto& [name, t] : items_) {
      feed(name.data(), name.size());
      feed(t.data().data(), t.data().size() * sizeof(T));
    }
    return h;
  }

  // Overwrites values (not structure) from another store with equal layout.
  void copy_values_from(const ParamStoreT& src) {
    if (src.items_.size() != items_.size())
      throw std::invalid_argument("copy_values_from: store layout mismatch");
    for (size_t i = 0; i < items_.size(); ++i) {
      if (items_[i].first != src.items_[i].first ||
          items_[i].second.shape() != src.items_[i].second.shape())
        throw std::invalid_argument("copy_values_from: mismatch at " + items_[i].first);
      items_[i].second.data() = src.items_[i].second.data();
    }
  }

 private:
  std::vector<std::pair<std::string, TensorT<T>>> items_;
  std::map<std::string, size_t> index_;
};

using ParamStore = ParamStoreT<float>;

// --- initialization ---

template <typename T>
TensorT<T> init_linear(Rng& rng, int fan_in, int fan_out) {
  const T bound = T(1) / std::sqrt(T(fan_in));
  std::vector<T> w(size_t(fan_in) * fan_out);
  for (auto& x : w) x = T(rng.uniform(-double(bound), double(bound)));
  return TensorT<T>::from({fan_in, fan_out}, std::move(w));
}

template <typename T>
TensorT<T> init_zeros_row(int n) {
  return TensorT<T>::zeros({1, n});
}

// --- layers ---

template <typename T>
TensorT<T> affine(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  return add_rowvec(matmul(x, w), b);
}

// Two-layer perceptron, ELU hidden, linear output.
template <typename T>
struct Mlp2T {
  TensorT<T> w1, b1, w2, b2;

  static Mlp2T create(ParamStoreT<T>& store, const std::string& prefix, int in, int hidden,
                      int out, Rng& rng) {
    Mlp2T m;
    m.w1 = store.add(prefix + "/w1", init_linear<T>(rng, in, hidden));
    m.b1 = store.add(prefix + "/b1", init_zeros_row<T>(hidden));
    m.w2 = store.add(prefix + "/w2", init_linear<T>(rng, hidden, out));
    m.b2 = store.add(prefix + "/b2", init_zeros_row<T>(out));
    return m;
  }

  TensorT<T> operator()(const TensorT<T>& x) const {
    return affine(elu_t(affine(x, w1, b1)), w2, b2);
  }
};

template <typename T>
struct GruParamsT {
  TensorT<T> wu, uu, bu, wr, ur, br, wc, uc, bc;

  static GruParamsT create(ParamStoreT<T>& store, const std::string& prefix, int d_in, int d_h,
                           Rng& rng) {
    GruParamsT g;
    g.wu = store.add(prefix + "/wu", init_linear<T>(rng, d_in, d_h));
    g.uu = store.add(prefix + "/uu", init_linear<T>(rng, d_h, d_h));
    g.bu = store.add(prefix + "/bu", init_zeros_row<T>(d_h));
    g.wr = store.add(prefix + "/wr", init_linear<T>(rng, d_in, d_h));
    g.ur = store.add(prefix + "/ur", init_linear<T>(rng, d_h, d_h));
    g.br = store.add(prefix + "/br", init_zeros_row<T>(d_h));
    g.wc = store.add(prefix + "/wc", init_linear<T>(rng, d_in, d_h));
    g.uc = store.add(prefix + "/uc", init_linear<T>(rng, d_h, d_h));
    g.bc = store.add(prefix + "/bc", init_zeros_row<T>(d_h));
    return g;
  }
};

// Gated recurrent unit: update/reset gates via logistic sigmoid, candidate
// via tanh, h' = (1-u) ⊙ h + u ⊙ candidate.
template <typename T>
TensorT<T> gru_cell(const TensorT<T>& x, const TensorT<T>& h_prev, const GruParamsT<T>& p) {
  auto u = sigmoid_t(add(affine(x, p.wu, p.bu), matmul(h_prev, p.uu)));
  auto r = sigmoid_t(add(affine(x, p.wr, p.br), matmul(h_prev, p.ur)));
  auto c = tanh_t(add(affine(x, p.wc, p.bc), matmul(mul(r, h_prev), p.uc)));
  return add(sub(h_prev, mul(u, h_prev)), mul(u, c));
}

// softmax(q.k^T / sqrt(d)).v
template <typename T>
TensorT<T> scaled_dot_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v) {
  if (q.cols() != k.cols())
    throw std::invalid_argument("attention: query/key feature mismatch " + shape_str(q.shape()) +
                                " vs " + shape_str(k.shape()));
  if (k.rows() != v.rows())
    throw std::invalid_argument("attention: key/value count mismatch " + shape_str(k.shape()) +
                                " vs " + shape_str(v.shape()));
  auto scores = scale(matmul_nt(q, k), T(1) / std::sqrt(T(q.cols())));
  return matmul(softmax_rows(scores), v);
}

// --- distribution primitives ---

// Closed-form KL(q || p) for diagonal Gaussians, summed over dimensions and
// meaned over batch rows.
template <typename T>
TensorT<T> gaussian_kl(const GaussianParamsT<T>& q, const GaussianParamsT<T>& p) {
  detail::require_same_shape(q.mean, p.mean, "gaussian_kl");
  detail::require_same_shape(q.stddev, p.stddev, "gaussian_kl");
  for (T s : q.stddev.data())
    if (!(s > T(0))) throw std::invalid_argument("gaussian_kl: non-positive stddev in q");
  for (T s : p.stddev.data())
    if (!(s > T(0))) throw std::invalid_argument("gaussian_kl: non-positive stddev in p");
  auto dm = sub(q.mean, p.mean);
  auto var_q = mul(q.stddev, q.stddev);
  auto var_p = mul(p.stddev, p.stddev);
  auto quad = div(add(var_q, mul(dm, dm)), scale(var_p, T(2)));
  auto elem = add_const(add(sub(log_t(p.stddev), log_t(q.stddev)), quad), T(-0.5));
  return scale(sum_all(elem), T(1) / T(q.mean.rows()));
}

// Reparameterized draw: mean + stddev ⊙ noise.
template <typename T>
TensorT<T> sample_gaussian(const GaussianParamsT<T>& params, const TensorT<T>& noise) {
  return add(params.mean, mul(params.stddev, noise));
}

// --- optimizer ---

template <typename T>
class AdamT {
 public:
  AdamT(ParamStoreT<T>& params, T lr, T grad_clip)
      : params_(&params), lr_(lr), clip_(grad_clip) {
    for (auto& [name, t] : params.items()) {
      m_.emplace_back(t.data().size(), T(0));
      v_.emplace_back(t.data().size(), T(0));
    }
  }

  // One update from the accumulated gradients; gradients are cleared.
  void step() {
    ++t_;
    double norm_sq = 0;
    for (auto& [name, p] : params_->items()) {
      p.node()->ensure_grad();
      for (T g : p.node()->grad) norm_sq += double(g) * double(g);
    }
    const T norm = T(std::sqrt(norm_sq));
    const T rescale = (clip_ > 0 && norm > clip_) ? clip_ / norm : T(1);

    const T bc1 = T(1) - std::pow(beta1_, T(t_));
    const T bc2 = T(1) - std::pow(beta2_, T(t_));
    size_t idx = 0;
    for (auto& [name, p] : params_->items()) {
      auto& val = p.data();
      auto& grad = p.node()->grad;
      auto& m = m_[idx];
      auto& v = v_[idx];
      for (size_t i = 0; i < val.size(); ++i) {
        const T g = grad[i] * rescale;
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g;
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g * g;
        val[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
      grad.assign(val.size(), T(0));
      ++idx;
    }
  }

  T last_grad_norm() const { return last_norm_; }

 private:
  ParamStoreT<T>* params_;
  T lr_, clip_;
  T beta1_ = T(0.9), beta2_ = T(0.999), eps_ = T(1e-8);
  T last_norm_ = 0;
  int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

using Adam = AdamT<float>;

// --- gradient checking ---

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
// with central differences of the recorded function. Meant to run in double.
template <typename T>
T grad_check(const std::function<TensorT<T>()>& f, std::span<TensorT<T>> inputs, T step) {
  for (auto& in : inputs) in.node()->grad.assign(in.data().size(), T(0));
  auto loss = f();
  backward(loss);
  std::vector<std::vector<T>> analytic;
  for (auto& in : inputs) {
    in.node()->ensure_grad();
    analytic.push_back(in.node()->grad);
  }

  T worst = 0;
  for (size_t t = 0; t < inputs.size(); ++t) {
    auto& val = inputs[t].data();
    for (size_t i = 0; i < val.size(); ++i) {
      const T keep = val[i];
      val[i] = keep + step;
      const T up = f().item();
      val[i] = keep - step;
      const T down = f().item();
      val[i] = keep;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw std::runtime_error("grad_check: non-finite intermediate value");
      const T numeric = (up - down) / (T(2) * step);
      const T a = analytic[t][i];
      const T err = std::abs(a - numeric) / std::max(T(1e-8), std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace tocm
