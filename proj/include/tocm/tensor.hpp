#pragma once

// Dense tensors with a reverse-mode differentiation record. Every operation
// builds a graph node holding the forward value plus a closure that scatters
// gradients to its parents; backward() walks the graph once in reverse
// topological order and then marks the record consumed.
//
// Tensors are rank 0..2 (scalars, vectors, matrices) viewed as row-major
// rows x cols. The scalar type is a template parameter: float for training,
// double for finite-difference checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "tocm/kernels.hpp"

namespace tocm {

template <typename T>
struct NodeT {
  std::vector<int> shape;
  int rows = 1, cols = 1;
  std::vector<T> val;
  std::vector<T> grad;  // allocated on first backward touch
  bool is_param = false;
  bool consumed = false;
  std::vector<std::shared_ptr<NodeT<T>>> parents;
  std::function<void()> backfn;

  int64_t numel() const { return int64_t(val.size()); }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), T(0));
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

template <typename T>
class TensorT {
 public:
  using Node = NodeT<T>;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static TensorT zeros(std::vector<int> shape) {
    return full(std::move(shape), T(0));
  }

  static TensorT full(std::vector<int> shape, T v) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    set_dims(*n);
    n->val.assign(size_t(n->rows) * n->cols, v);
    return TensorT(std::move(n));
  }

  static TensorT from(std::vector<int> shape, std::vector<T> data) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    set_dims(*n);
    if (int64_t(data.size()) != int64_t(n->rows) * n->cols)
      throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(n->shape));
    n->val = std::move(data);
    return TensorT(std::move(n));
  }

  static TensorT scalar(T v) { return from({}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  int64_t numel() const { return node_->numel(); }

  std::vector<T>& data() { return node_->val; }
  const std::vector<T>& data() const { return node_->val; }
  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }

  T item() const {
    if (node_->numel() != 1)
      throw std::invalid_argument("item: tensor " + shape_str(node_->shape) + " is not scalar");
    return node_->val[0];
  }

  T at(int i, int j) const { return node_->val[size_t(i) * node_->cols + j]; }
  T& at(int i, int j) { return node_->val[size_t(i) * node_->cols + j]; }

  TensorT& mark_param() {
    node_->is_param = true;
    return *this;
  }
  bool is_param() const { return node_->is_param; }

  std::shared_ptr<Node> node() const { return node_; }
  Node* raw() const { return node_.get(); }

 private:
  static void set_dims(Node& n) {
    if (n.shape.size() > 2)
      throw std::invalid_argument("tensor: rank > 2 unsupported " + shape_str(n.shape));
    for (int d : n.shape)
      if (d <= 0) throw std::invalid_argument("tensor: non-positive extent " + shape_str(n.shape));
    n.rows = n.shape.size() == 2 ? n.shape[0] : 1;
    n.cols = n.shape.empty() ? 1 : n.shape.back();
  }

  std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;

// --- graph plumbing ---

namespace detail {

template <typename T>
TensorT<T> make_op(std::vector<int> shape,
                   std::vector<std::shared_ptr<NodeT<T>>> parents) {
  auto out = TensorT<T>::zeros(std::move(shape));
  out.node()->parents = std::move(parents);
  return out;
}

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace detail

// Fresh leaf holding a copy of the values; cuts the graph above it.
template <typename T>
TensorT<T> detach(const TensorT<T>& t) {
  return TensorT<T>::from(t.shape(), t.data());
}

// Runs the reverse pass from a scalar loss. Gradients accumulate into every
// reachable node; the record is single-use.
template <typename T>
void backward(const TensorT<T>& loss) {
  auto root = loss.node();
  if (!root) throw std::invalid_argument("backward: undefined tensor");
  if (root->numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(root->shape));
  if (root->consumed) throw std::runtime_error("backward: differentiation record already consumed");

  std::vector<NodeT<T>*> order;
  std::unordered_set<NodeT<T>*> seen;
  std::vector<std::pair<NodeT<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      NodeT<T>* p = node->parents[idx++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backfn) (*it)->backfn();
  root->consumed = true;
}

// --- operations ---

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto out = detail::make_op<T>({m, n}, {a.node(), b.node()});
  kernels::matmul_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  auto* o = out.raw();
  auto* pa = a.raw();
  auto* pb = b.raw();
  out.node()->backfn = [o, pa, pb, m, k, n] {
    pa->ensure_grad();
    pb->ensure_grad();
    std::vector<T> bt(size_t(n) * size_t(k));
    kernels::transpose(pb->val.data(), bt.data(), k, n);
    kernels::matmul_nn_acc(o->grad.data(), bt.data(), pa->grad.data(), m, n, k);
    std::vector<T> at(size_t(k) * size_t(m));
    kernels::transpose(pa->val.data(), at.data(), m, k);
    kernels::matmul_nn_acc(at.data(), o->grad.data(), pb->grad.data(), k, m, n);
  };
  return out;
}

// a[m,d] . b[p,d]^T
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols())
    throw std::invalid_argument("matmul_nt: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const int m = a.rows(), d = a.cols(), p = b.rows();
  auto out = detail::make_op<T>({m, p}, {a.node(), b.node()});
  kernels::matmul_nt_acc(a.data().data(), b.data().data(), out.data().data(), m, d, p);
  auto* o = out.raw();
  auto* pa = a.raw();
  auto* pb = b.raw();
  out.node()->backfn = [o, pa, pb, m, d, p] {
    pa->ensure_grad();
    pb->ensure_grad();
    kernels::matmul_nn_acc(o->grad.data(), pb->val.data(), pa->grad.data(), m, p, d);
    std::vector<T> gt(size_t(p) * size_t(m));
    kernels::transpose(o->grad.data(), gt.data(), m, p);
    kernels::matmul_nn_acc(gt.data(), pa->val.data(), pb->grad.data(), p, m, d);
  };
  return out;
}

namespace detail {

template <typename T, typename FwdFn, typename BwdFn>
TensorT<T> binary_elemwise(const TensorT<T>& a, const TensorT<T>& b, const char* name, FwdFn fwd,
                           BwdFn bwd) {
  require_same_shape(a, b, name);
  auto out = make_op<T>(a.shape(), {a.node(), b.node()});
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i], bv[i]);
  auto* o = out.raw();
  auto* pa = a.raw();
  auto* pb = b.raw();
  out.node()->backfn = [o, pa, pb, bwd] {
    pa->ensure_grad();
    pb->ensure_grad();
    for (size_t i = 0; i < o->val.size(); ++i)
      bwd(o->grad[i], pa->val[i], pb->val[i], pa->grad[i], pb->grad[i]);
  };
  return out;
}

template <typename T, typename FwdFn, typename BwdFn>
TensorT<T> unary_elemwise(const TensorT<T>& a, FwdFn fwd, BwdFn bwd) {
  auto out = make_op<T>(a.shape(), {a.node()});
  const auto& av = a.data();
  auto& ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i]);
  auto* o = out.raw();
  auto* pa = a.raw();
  out.node()->backfn = [o, pa, bwd] {
    pa->ensure_grad();
    for (size_t i = 0; i < o->val.size(); ++i) pa->grad[i] += bwd(o->grad[i], pa->val[i], o->val[i]);
  };
  return out;
}

}  // namespace detail

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elemwise(
      a, b, "add", [](T x, T y) { return x + y; },
      [](T g, T, T, T& gx, T& gy) {
        gx += g;
        gy += g;
      });
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elemwise(
      a, b, "sub", [](T x, T y) { return x - y; },
      [](T g, T, T, T& gx, T& gy) {
        gx += g;
        gy -= g;
      });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elemwise(
      a, b, "mul", [](T x, T y) { return x * y; },
      [](T g, T x, T y, T& gx, T& gy) {
        gx += g * y;
        gy += g * x;
      });
}

template <typename T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elemwise(
      a, b, "div", [](T x, T y) { return x / y; },
      [](T g, T x, T y, T& gx, T& gy) {
        gx += g / y;
        gy -= g * x / (y * y);
      });
}

template <typename T>
TensorT<T> min_elem(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elemwise(
      a, b, "min_elem", [](T x, T y) { return x <= y ? x : y; },
      [](T g, T x, T y, T& gx, T& gy) {
        if (x <= y)
          gx += g;
        else
          gy += g;
      });
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  return detail::unary_elemwise(
      a, [s](T x) { return s * x; }, [s](T g, T, T) { return s * g; });
}

template <typename T>
TensorT<T> add_const(const TensorT<T>& a, T c) {
  return detail::unary_elemwise(
      a, [c](T x) { return x + c; }, [](T g, T, T) { return g; });
}

template <typename T>
TensorT<T> neg(const TensorT<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
TensorT<T> tanh_t(const TensorT<T>& a) {
  return detail::unary_elemwise(
      a, [](T x) { return std::tanh(x); }, [](T g, T, T y) { return g * (T(1) - y * y); });
}

template <typename T>
TensorT<T> sigmoid_t(const TensorT<T>& a) {
  return detail::unary_elemwise(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T g, T, T y) { return g * y * (T(1) - y); });
}

template <typename T>
TensorT<T> elu_t(const TensorT<T>& a) {
  return detail::unary_elemwise(
      a, [](T x) { return x > T(0) ? x : std::expm1(x); },
      [](T g, T x, T y) { return x > T(0) ? g : g * (y + T(1)); });
}

template <typename T>
TensorT<T> relu_t(const TensorT<T>& a) {
  return detail::unary_elemwise(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T g, T x, T) { return x > T(0) ? g : T(0); });
}

template <typename T>
TensorT<T> softplus_t(const TensorT<T>& a) {
  return detail::unary_elemwise(
      a,
      [](T x) { return x > T(30) ? x : std::log1p(std::exp(x)); },
      [](T g, T x, T) { return g / (T(1) + std::exp(-x)); });
}

template <typename T>
TensorT<T> exp_t(const TensorT<T>& a) {
  return detail::unary_elemwise(
      a, [](T x) { return std::exp(x); }, [](T g, T, T y) { return g * y; });
}

template <typename T>
TensorT<T> log_t(const TensorT<T>& a) {
  return detail::unary_elemwise(
      a, [](T x) { return std::log(x); }, [](T g, T x, T) { return g / x; });
}

template <typename T>
TensorT<T> clamp_t(const TensorT<T>& a, T lo, T hi) {
  return detail::unary_elemwise(
      a, [lo, hi](T x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](T g, T x, T) { return (x >= lo && x <= hi) ? g : T(0); });
}

// Hard threshold with a rectangular-window pseudo-derivative: forward emits
// the binary step of u >= 0, backward passes 1/(2*width) inside |u| < width.
// smooth=true instead runs the ramp the pseudo-derivative is exact for.
template <typename T>
TensorT<T> spike_t(const TensorT<T>& u, T width, bool smooth = false) {
  const T slope = T(1) / (T(2) * width);
  return detail::unary_elemwise(
      u,
      [width, slope, smooth](T x) {
        if (smooth) return std::min(std::max((x + width) * slope, T(0)), T(1));
        return x >= T(0) ? T(1) : T(0);
      },
      [width, slope](T g, T x, T) { return std::abs(x) < width ? g * slope : T(0); });
}

// b broadcast over every row of a.
template <typename T>
TensorT<T> add_rowvec(const TensorT<T>& a, const TensorT<T>& b) {
  if (b.cols() != a.cols() || b.rows() != 1)
    throw std::invalid_argument("add_rowvec: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  auto out = detail::make_op<T>(a.shape(), {a.node(), b.node()});
  const int m = a.rows(), n = a.cols();
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) ov[size_t(i) * n + j] = av[size_t(i) * n + j] + bv[j];
  auto* o = out.raw();
  auto* pa = a.raw();
  auto* pb = b.raw();
  out.node()->backfn = [o, pa, pb, m, n] {
    pa->ensure_grad();
    pb->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const T g = o->grad[size_t(i) * n + j];
        pa->grad[size_t(i) * n + j] += g;
        pb->grad[j] += g;
      }
  };
  return out;
}

// Column vector s[m,1] scales every row of a[m,n].
template <typename T>
TensorT<T> mul_colvec(const TensorT<T>& a, const TensorT<T>& s) {
  if (s.rows() != a.rows() || s.cols() != 1)
    throw std::invalid_argument("mul_colvec: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(s.shape()));
  auto out = detail::make_op<T>(a.shape(), {a.node(), s.node()});
  const int m = a.rows(), n = a.cols();
  const auto& av = a.data();
  const auto& sv = s.data();
  auto& ov = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) ov[size_t(i) * n + j] = av[size_t(i) * n + j] * sv[i];
  auto* o = out.raw();
  auto* pa = a.raw();
  auto* ps = s.raw();
  out.node()->backfn = [o, pa, ps, m, n] {
    pa->ensure_grad();
    ps->ensure_grad();
    for (int i = 0; i < m; ++i) {
      T acc = 0;
      for (int j = 0; j < n; ++j) {
        const T g = o->grad[size_t(i) * n + j];
        pa->grad[size_t(i) * n + j] += g * ps->val[i];
        acc += g * pa->val[size_t(i) * n + j];
      }
      ps->grad[i] += acc;
    }
  };
  return out;
}

template <typename T>
TensorT<T> concat_cols(std::span<const TensorT<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int m = parts[0].rows();
  int n = 0;
  std::vector<std::shared_ptr<NodeT<T>>> parents;
  for (const auto& p : parts) {
    if (p.rows() != m)
      throw std::invalid_argument("concat_cols: row mismatch " + shape_str(p.shape()));
    n += p.cols();
    parents.push_back(p.node());
  }
  auto out = detail::make_op<T>({m, n}, std::move(parents));
  auto& ov = out.data();
  int off = 0;
  for (const auto& p : parts) {
    const int pc = p.cols();
    const auto& pv = p.data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < pc; ++j) ov[size_t(i) * n + off + j] = pv[size_t(i) * pc + j];
    off += pc;
  }
  auto* o = out.raw();
  out.node()->backfn = [o, m, n] {
    int off2 = 0;
    for (auto& parent : o->parents) {
      parent->ensure_grad();
      const int pc = parent->cols;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < pc; ++j)
          parent->grad[size_t(i) * pc + j] += o->grad[size_t(i) * n + off2 + j];
      off2 += pc;
    }
  };
  return out;
}

template <typename T>
TensorT<T> concat_cols(std::initializer_list<TensorT<T>> parts) {
  std::vector<TensorT<T>> v(parts);
  return concat_cols(std::span<const TensorT<T>>(v));
}

// Columns [c0, c1) of a.
template <typename T>
TensorT<T> slice_cols(const TensorT<T>& a, int c0, int c1) {
  if (c0 < 0 || c1 <= c0 || c1 > a.cols())
    throw std::invalid_argument("slice_cols: bad range on " + shape_str(a.shape()));
  const int m = a.rows(), n = a.cols(), w = c1 - c0;
  auto out = detail::make_op<T>({m, w}, {a.node()});
  const auto& av = a.data();
  auto& ov = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) ov[size_t(i) * w + j] = av[size_t(i) * n + c0 + j];
  auto* o = out.raw();
  auto* pa = a.raw();
  out.node()->backfn = [o, pa, m, n, w, c0] {
    pa->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) pa->grad[size_t(i) * n + c0 + j] += o->grad[size_t(i) * w + j];
  };
  return out;
}

template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& a) {
  const int m = a.rows(), n = a.cols();
  auto out = detail::make_op<T>(a.shape(), {a.node()});
  const auto& av = a.data();
  auto& ov = out.data();
  for (int i = 0; i < m; ++i) {
    const T* x = av.data() + size_t(i) * n;
    T* y = ov.data() + size_t(i) * n;
    T mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    T z = 0;
    for (int j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (int j = 0; j < n; ++j) y[j] /= z;
  }
  auto* o = out.raw();
  auto* pa = a.raw();
  out.node()->backfn = [o, pa, m, n] {
    pa->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const T* y = o->val.data() + size_t(i) * n;
      const T* gy = o->grad.data() + size_t(i) * n;
      T dot = 0;
      for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (int j = 0; j < n; ++j) pa->grad[size_t(i) * n + j] += y[j] * (gy[j] - dot);
    }
  };
  return out;
}

template <typename T>
TensorT<T> log_softmax_rows(const TensorT<T>& a) {
  const int m = a.rows(), n = a.cols();
  auto out = detail::make_op<T>(a.shape(), {a.node()});
  const auto& av = a.data();
  auto& ov = out.data();
  for (int i = 0; i < m; ++i) {
    const T* x = av.data() + size_t(i) * n;
    T* y = ov.data() + size_t(i) * n;
    T mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    T z = 0;
    for (int j = 0; j < n; ++j) z += std::exp(x[j] - mx);
    const T lz = std::log(z) + mx;
    for (int j = 0; j < n; ++j) y[j] = x[j] - lz;
  }
  auto* o = out.raw();
  auto* pa = a.raw();
  out.node()->backfn = [o, pa, m, n] {
    pa->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const T* y = o->val.data() + size_t(i) * n;
      const T* gy = o->grad.data() + size_t(i) * n;
      T gsum = 0;
      for (int j = 0; j < n; ++j) gsum += gy[j];
      for (int j = 0; j < n; ++j)
        pa->grad[size_t(i) * n + j] += gy[j] - std::exp(y[j]) * gsum;
    }
  };
  return out;
}

template <typename T>
TensorT<T> rowsum(const TensorT<T>& a) {
  const int m = a.rows(), n = a.cols();
  auto out = detail::make_op<T>({m, 1}, {a.node()});
  const auto& av = a.data();
  auto& ov = out.data();
  for (int i = 0; i < m; ++i) {
    T acc = 0;
    for (int j = 0; j < n; ++j) acc += av[size_t(i) * n + j];
    ov[i] = acc;
  }
  auto* o = out.raw();
  auto* pa = a.raw();
  out.node()->backfn = [o, pa, m, n] {
    pa->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) pa->grad[size_t(i) * n + j] += o->grad[i];
  };
  return out;
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& a) {
  auto out = detail::make_op<T>({}, {a.node()});
  T acc = 0;
  for (T x : a.data()) acc += x;
  out.data()[0] = acc;
  auto* o = out.raw();
  auto* pa = a.raw();
  out.node()->backfn = [o, pa] {
    pa->ensure_grad();
    for (auto& g : pa->grad) g += o->grad[0];
  };
  return out;
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& a) {
  return scale(sum_all(a), T(1) / T(a.numel()));
}

// Mean elementwise Huber loss: quadratic for |error| <= 1, |error| - 1/2
// beyond, averaged over all elements.
template <typename T>
TensorT<T> huber(const TensorT<T>& pred, const TensorT<T>& target) {
  detail::require_same_shape(pred, target, "huber");
  auto out = detail::make_op<T>({}, {pred.node(), target.node()});
  const auto& pv = pred.data();
  const auto& tv = target.data();
  const T inv_n = T(1) / T(pv.size());
  T acc = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    const T e = pv[i] - tv[i];
    const T ae = std::abs(e);
    acc += ae <= T(1) ? T(0.5) * e * e : ae - T(0.5);
  }
  out.data()[0] = acc * inv_n;
  auto* o = out.raw();
  auto* pp = pred.raw();
  auto* pt = target.raw();
  out.node()->backfn = [o, pp, pt, inv_n] {
    pp->ensure_grad();
    pt->ensure_grad();
    const T g = o->grad[0] * inv_n;
    for (size_t i = 0; i < pp->val.size(); ++i) {
      const T e = pp->val[i] - pt->val[i];
      const T d = g * std::min(std::max(e, T(-1)), T(1));
      pp->grad[i] += d;
      pt->grad[i] -= d;
    }
  };
  return out;
}

}  // namespace tocm
