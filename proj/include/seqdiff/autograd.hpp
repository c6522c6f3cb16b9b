#pragma once
// Define-by-run reverse-mode differentiation over 2-D tensors.
//
// Each op computes its value eagerly and, when any input requires a
// gradient and recording is enabled, stores a closure that pushes the
// output gradient back into its inputs. backward() walks the recorded graph
// in reverse topological order.

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "seqdiff/kernels/kernels.hpp"
#include "seqdiff/tensor.hpp"

namespace seqdiff::ag {

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (grad.size() != value.size() || grad.rows() != value.rows()) {
      grad = Tensor<T>(value.rows(), value.cols());
    }
    return grad;
  }
};

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

/// Disables graph recording for its lifetime (inference, sampling).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Var constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return Var(std::move(n));
  }
  static Var leaf(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.fill(T(0));
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds an op output; records the backward closure only when needed.
template <class T>
Var<T> make_result(Tensor<T> value, std::initializer_list<Var<T>> inputs,
                   std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      n->requires_grad = true;
      for (const auto& in : inputs) n->inputs.push_back(in.ptr());
      n->backward_fn = std::move(backward);
    }
  }
  return Var<T>(std::move(n));
}

template <class T>
Var<T> make_result(Tensor<T> value, const std::vector<Var<T>>& inputs,
                   std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      n->requires_grad = true;
      for (const auto& in : inputs) n->inputs.push_back(in.ptr());
      n->backward_fn = std::move(backward);
    }
  }
  return Var<T>(std::move(n));
}

/// Accumulates d(root)/d(leaf) into every reachable leaf's grad. The root
/// must be 1x1.
template <class T>
void backward(const Var<T>& root) {
  require(root.rows() == 1 && root.cols() == 1, "backward: root must be a scalar");
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->inputs.size()) {
      Node<T>* child = n->inputs[idx++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// Ops

template <class T>
inline const kernels::KernelTable<T>& K() {
  return kernels::table<T>();
}

/// y = x Wᵀ + b, with W stored [out x in] and b [1 x out] (optional).
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>* b = nullptr) {
  const std::size_t n = x.rows(), in = x.cols(), out = w.rows();
  require(w.cols() == in, "linear: input width mismatch");
  Tensor<T> y(n, out);
  K<T>().gemm(kernels::Trans::no, kernels::Trans::yes, n, out, in, T(1), x.value().data(), in,
              w.value().data(), in, T(0), y.data(), out);
  if (b != nullptr) {
    require(b->rows() == 1 && b->cols() == out, "linear: bias shape");
    for (std::size_t r = 0; r < n; ++r) K<T>().add(out, y.row(r), b->value().data(), y.row(r));
  }
  std::vector<Var<T>> ins{x, w};
  if (b != nullptr) ins.push_back(*b);
  const bool has_b = b != nullptr;
  return make_result<T>(std::move(y), ins, [n, in, out, has_b](Node<T>& self) {
    const Tensor<T>& g = self.grad;
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    if (xn.requires_grad) {
      K<T>().gemm(kernels::Trans::no, kernels::Trans::no, n, in, out, T(1), g.data(), out,
                  wn.value.data(), in, T(1), xn.ensure_grad().data(), in);
    }
    if (wn.requires_grad) {
      K<T>().gemm(kernels::Trans::yes, kernels::Trans::no, out, in, n, T(1), g.data(), out,
                  xn.value.data(), in, T(1), wn.ensure_grad().data(), in);
    }
    if (has_b && self.inputs[2]->requires_grad) {
      T* gb = self.inputs[2]->ensure_grad().data();
      for (std::size_t r = 0; r < n; ++r) K<T>().add(out, gb, g.row(r), gb);
    }
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require(a.value().same_shape(b.value()), "add: shape mismatch");
  Tensor<T> y(a.rows(), a.cols());
  K<T>().add(y.size(), a.value().data(), b.value().data(), y.data());
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) K<T>().axpy(self.grad.size(), T(1), self.grad.data(), in->ensure_grad().data());
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require(a.value().same_shape(b.value()), "sub: shape mismatch");
  Tensor<T> y(a.rows(), a.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    if (self.inputs[0]->requires_grad) {
      K<T>().axpy(self.grad.size(), T(1), self.grad.data(), self.inputs[0]->ensure_grad().data());
    }
    if (self.inputs[1]->requires_grad) {
      K<T>().axpy(self.grad.size(), T(-1), self.grad.data(), self.inputs[1]->ensure_grad().data());
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require(a.value().same_shape(b.value()), "mul: shape mismatch");
  Tensor<T> y(a.rows(), a.cols());
  K<T>().mul(y.size(), a.value().data(), b.value().data(), y.data());
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    const std::size_t sz = self.grad.size();
    if (an.requires_grad) K<T>().mul_acc(sz, self.grad.data(), bn.value.data(), an.ensure_grad().data());
    if (bn.requires_grad) K<T>().mul_acc(sz, self.grad.data(), an.value.data(), bn.ensure_grad().data());
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> y = a.value();
  K<T>().scale(y.size(), c, y.data());
  return make_result<T>(std::move(y), {a}, [c](Node<T>& self) {
    K<T>().axpy(self.grad.size(), c, self.grad.data(), self.inputs[0]->ensure_grad().data());
  });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T c) {
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c;
  return make_result<T>(std::move(y), {a}, [](Node<T>& self) {
    K<T>().axpy(self.grad.size(), T(1), self.grad.data(), self.inputs[0]->ensure_grad().data());
  });
}

/// Multiplies row r by factors[r] (constant, no gradient to the factors).
template <class T>
Var<T> scale_rows(const Var<T>& a, std::vector<T> factors) {
  require(factors.size() == a.rows(), "scale_rows: factor count");
  Tensor<T> y = a.value();
  for (std::size_t r = 0; r < y.rows(); ++r) K<T>().scale(y.cols(), factors[r], y.row(r));
  return make_result<T>(std::move(y), {a}, [f = std::move(factors)](Node<T>& self) {
    T* g = self.inputs[0]->ensure_grad().data();
    const std::size_t c = self.grad.cols();
    for (std::size_t r = 0; r < self.grad.rows(); ++r) K<T>().axpy(c, f[r], self.grad.row(r), g + r * c);
  });
}

template <class T>
Var<T> silu(const Var<T>& a) {
  Tensor<T> y(a.rows(), a.cols());
  K<T>().silu(y.size(), a.value().data(), y.data());
  return make_result<T>(std::move(y), {a}, [](Node<T>& self) {
    auto& in = *self.inputs[0];
    K<T>().silu_backward(self.grad.size(), in.value.data(), self.grad.data(), in.ensure_grad().data());
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> y(a.rows(), a.cols());
  K<T>().sigmoid(y.size(), a.value().data(), y.data());
  return make_result<T>(std::move(y), {a}, [](Node<T>& self) {
    T* g = self.inputs[0]->ensure_grad().data();
    const T* yv = self.value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * yv[i] * (T(1) - yv[i]);
  });
}

template <class T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> y(a.rows(), a.cols());
  K<T>().tanh(y.size(), a.value().data(), y.data());
  return make_result<T>(std::move(y), {a}, [](Node<T>& self) {
    T* g = self.inputs[0]->ensure_grad().data();
    const T* yv = self.value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * (T(1) - yv[i] * yv[i]);
  });
}

/// Column slice [start, start + len).
template <class T>
Var<T> slice_cols(const Var<T>& a, std::size_t start, std::size_t len) {
  require(start + len <= a.cols(), "slice_cols: out of range");
  Tensor<T> y(a.rows(), len);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy(a.value().row(r) + start, a.value().row(r) + start + len, y.row(r));
  }
  return make_result<T>(std::move(y), {a}, [start, len](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
      K<T>().add(len, g.row(r) + start, self.grad.row(r), g.row(r) + start);
    }
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == n, "concat_cols: row mismatch");
    total += p.cols();
  }
  Tensor<T> y(n, total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < n; ++r) std::copy(p.value().row(r), p.value().row(r) + p.cols(), y.row(r) + off);
    off += p.cols();
  }
  return make_result<T>(std::move(y), parts, [](Node<T>& self) {
    std::size_t o = 0;
    for (auto& in : self.inputs) {
      const std::size_t c = in->value.cols();
      if (in->requires_grad) {
        auto& g = in->ensure_grad();
        for (std::size_t r = 0; r < self.grad.rows(); ++r) K<T>().add(c, g.row(r), self.grad.row(r) + o, g.row(r));
      }
      o += c;
    }
  });
}

/// Row i of the input becomes rows i*times .. i*times + times - 1.
template <class T>
Var<T> repeat_rows(const Var<T>& a, std::size_t times) {
  Tensor<T> y(a.rows() * times, a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t t = 0; t < times; ++t) std::copy(a.value().row(r), a.value().row(r) + a.cols(), y.row(r * times + t));
  }
  return make_result<T>(std::move(y), {a}, [times](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t t = 0; t < times; ++t) K<T>().add(g.cols(), g.row(r), self.grad.row(r * times + t), g.row(r));
    }
  });
}

/// Picks rows start, start + stride, ..., count of them.
template <class T>
Var<T> gather_rows(const Var<T>& a, std::size_t start, std::size_t stride, std::size_t count) {
  require(count == 0 || start + (count - 1) * stride < a.rows(), "gather_rows: out of range");
  Tensor<T> y(count, a.cols());
  for (std::size_t j = 0; j < count; ++j) {
    const T* src = a.value().row(start + j * stride);
    std::copy(src, src + a.cols(), y.row(j));
  }
  return make_result<T>(std::move(y), {a}, [start, stride](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t j = 0; j < self.grad.rows(); ++j) {
      T* dst = g.row(start + j * stride);
      K<T>().add(g.cols(), dst, self.grad.row(j), dst);
    }
  });
}

/// parts[t] is [B x c]; output row b * parts.size() + t is parts[t] row b.
template <class T>
Var<T> interleave_rows(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "interleave_rows: no inputs");
  const std::size_t steps = parts.size(), b = parts[0].rows(), c = parts[0].cols();
  Tensor<T> y(b * steps, c);
  for (std::size_t t = 0; t < steps; ++t) {
    require(parts[t].rows() == b && parts[t].cols() == c, "interleave_rows: shape mismatch");
    for (std::size_t r = 0; r < b; ++r) std::copy(parts[t].value().row(r), parts[t].value().row(r) + c, y.row(r * steps + t));
  }
  return make_result<T>(std::move(y), parts, [steps, b, c](Node<T>& self) {
    for (std::size_t t = 0; t < steps; ++t) {
      auto& in = *self.inputs[t];
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      for (std::size_t r = 0; r < b; ++r) K<T>().add(c, g.row(r), self.grad.row(r * steps + t), g.row(r));
    }
  });
}

/// Group normalization without affine terms. Each row holds `channels`
/// channels of `cols / channels` contiguous elements; channels are split into
/// `groups` consecutive groups that are normalized independently.
template <class T>
Var<T> group_norm(const Var<T>& a, std::size_t groups, std::size_t channels, T eps = T(1e-5)) {
  require(channels > 0 && groups > 0 && channels % groups == 0, "group_norm: channels % groups != 0");
  require(a.cols() % channels == 0, "group_norm: width not a multiple of channels");
  const std::size_t n = a.rows();
  const std::size_t gsize = a.cols() / groups;
  Tensor<T> y(n, a.cols());
  std::vector<T> inv_std(n * groups);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t g = 0; g < groups; ++g) {
      const T* x = a.value().row(r) + g * gsize;
      const T mean = K<T>().sum(gsize, x) / T(gsize);
      const T var = K<T>().sum_sq_diff(gsize, x, mean) / T(gsize);
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[r * groups + g] = is;
      T* yo = y.row(r) + g * gsize;
      for (std::size_t i = 0; i < gsize; ++i) yo[i] = (x[i] - mean) * is;
    }
  }
  return make_result<T>(std::move(y), {a}, [groups, gsize, inv_std = std::move(inv_std)](Node<T>& self) {
    auto& gx = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
      for (std::size_t g = 0; g < groups; ++g) {
        const T* dy = self.grad.row(r) + g * gsize;
        const T* yv = self.value.row(r) + g * gsize;
        const T mdy = K<T>().sum(gsize, dy) / T(gsize);
        const T mdyy = K<T>().dot(gsize, dy, yv) / T(gsize);
        const T is = inv_std[r * groups + g];
        T* dx = gx.row(r) + g * gsize;
        for (std::size_t i = 0; i < gsize; ++i) dx[i] += is * (dy[i] - mdy - yv[i] * mdyy);
      }
    }
  });
}

/// y[r, c*S + s] = x[r, c*S + s] * scale[r, c] (+ shift[r, c]).
template <class T>
Var<T> channel_affine(const Var<T>& x, const Var<T>& scale_v, const Var<T>* shift) {
  const std::size_t n = x.rows(), ch = scale_v.cols();
  require(scale_v.rows() == n && ch > 0 && x.cols() % ch == 0, "channel_affine: shape mismatch");
  if (shift != nullptr) require(shift->rows() == n && shift->cols() == ch, "channel_affine: shift shape");
  const std::size_t sp = x.cols() / ch;
  Tensor<T> y(n, x.cols());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T s = scale_v.value()(r, c);
      const T b = shift != nullptr ? shift->value()(r, c) : T(0);
      const T* xi = x.value().row(r) + c * sp;
      T* yo = y.row(r) + c * sp;
      for (std::size_t i = 0; i < sp; ++i) yo[i] = xi[i] * s + b;
    }
  }
  std::vector<Var<T>> ins{x, scale_v};
  if (shift != nullptr) ins.push_back(*shift);
  return make_result<T>(std::move(y), ins, [n, ch, sp](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& sn = *self.inputs[1];
    Node<T>* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < ch; ++c) {
        const T* g = self.grad.row(r) + c * sp;
        if (xn.requires_grad) K<T>().axpy(sp, sn.value(r, c), g, xn.ensure_grad().row(r) + c * sp);
        if (sn.requires_grad) sn.ensure_grad()(r, c) += K<T>().dot(sp, g, xn.value.row(r) + c * sp);
        if (bn != nullptr && bn->requires_grad) bn->ensure_grad()(r, c) += K<T>().sum(sp, g);
      }
    }
  });
}

/// Mean over all elements of (a - b)^2.
template <class T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  require(a.value().same_shape(b.value()), "mse: shape mismatch");
  const std::size_t sz = a.value().size();
  Tensor<T> diff(a.rows(), a.cols());
  for (std::size_t i = 0; i < sz; ++i) diff[i] = a.value()[i] - b.value()[i];
  Tensor<T> y(1, 1, K<T>().dot(sz, diff.data(), diff.data()) / T(sz));
  return make_result<T>(std::move(y), {a, b}, [diff = std::move(diff), sz](Node<T>& self) {
    const T c = T(2) * self.grad[0] / T(sz);
    if (self.inputs[0]->requires_grad) K<T>().axpy(sz, c, diff.data(), self.inputs[0]->ensure_grad().data());
    if (self.inputs[1]->requires_grad) K<T>().axpy(sz, -c, diff.data(), self.inputs[1]->ensure_grad().data());
  });
}

template <class T>
Var<T> sum(const Var<T>& a) {
  Tensor<T> y(1, 1, K<T>().sum(a.value().size(), a.value().data()));
  return make_result<T>(std::move(y), {a}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

/// Softmax cross-entropy averaged over rows; labels are class indices.
template <class T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.rows(), c = logits.cols();
  require(labels.size() == n, "softmax_cross_entropy: label count");
  Tensor<T> prob(n, c);
  T loss = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const T* z = logits.value().row(r);
    T mx = z[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    T s = 0;
    for (std::size_t j = 0; j < c; ++j) {
      prob(r, j) = std::exp(z[j] - mx);
      s += prob(r, j);
    }
    for (std::size_t j = 0; j < c; ++j) prob(r, j) /= s;
    require(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < c, "softmax_cross_entropy: label range");
    loss -= std::log(std::max(prob(r, labels[r]), T(1e-30)));
  }
  Tensor<T> y(1, 1, loss / T(n));
  return make_result<T>(std::move(y), {logits}, [prob = std::move(prob), labels, n, c](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    const T k = self.grad[0] / T(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        g(r, j) += k * (prob(r, j) - (static_cast<int>(j) == labels[r] ? T(1) : T(0)));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution over channel-major image rows.

struct ConvGeometry {
  std::size_t in_ch, height, width, out_ch, kernel, stride, pad;
  std::size_t out_h() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * pad - kernel) / stride + 1; }
  std::size_t patch() const { return in_ch * kernel * kernel; }
};

namespace detail {
template <class T>
void im2col(const ConvGeometry& g, const T* img, T* cols) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* dst = cols + ((c * g.kernel + ky) * g.kernel + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t x = 0; x < ow; ++x) {
            const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) && ix < static_cast<long>(g.width);
            dst[y * ow + x] = inside ? img[(c * g.height + iy) * g.width + ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const ConvGeometry& g, const T* cols, T* img) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* src = cols + ((c * g.kernel + ky) * g.kernel + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t x = 0; x < ow; ++x) {
            const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            img[(c * g.height + iy) * g.width + ix] += src[y * ow + x];
          }
        }
      }
    }
  }
}
}  // namespace detail

/// 2-D convolution. x rows are [in_ch x H x W]; w is [out_ch x in_ch*k*k];
/// b is [1 x out_ch]. Output rows are [out_ch x out_h x out_w].
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvGeometry& g) {
  require(x.cols() == g.in_ch * g.height * g.width, "conv2d: input width mismatch");
  require(w.rows() == g.out_ch && w.cols() == g.patch(), "conv2d: weight shape");
  require(b.rows() == 1 && b.cols() == g.out_ch, "conv2d: bias shape");
  const std::size_t n = x.rows(), hw = g.out_h() * g.out_w(), patch = g.patch();
  Tensor<T> y(n, g.out_ch * hw);
  std::vector<T> cols(patch * hw);
  for (std::size_t r = 0; r < n; ++r) {
    detail::im2col(g, x.value().row(r), cols.data());
    T* out = y.row(r);
    for (std::size_t c = 0; c < g.out_ch; ++c) std::fill(out + c * hw, out + (c + 1) * hw, b.value()[c]);
    K<T>().gemm(kernels::Trans::no, kernels::Trans::no, g.out_ch, hw, patch, T(1), w.value().data(), patch,
                cols.data(), hw, T(1), out, hw);
  }
  return make_result<T>(std::move(y), {x, w, b}, [g, n, hw, patch](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    std::vector<T> cols(patch * hw), dcols(patch * hw);
    for (std::size_t r = 0; r < n; ++r) {
      const T* gy = self.grad.row(r);
      if (wn.requires_grad) {
        detail::im2col(g, xn.value.row(r), cols.data());
        K<T>().gemm(kernels::Trans::no, kernels::Trans::yes, g.out_ch, patch, hw, T(1), gy, hw, cols.data(), hw,
                    T(1), wn.ensure_grad().data(), patch);
      }
      if (bn.requires_grad) {
        auto& gb = bn.ensure_grad();
        for (std::size_t c = 0; c < g.out_ch; ++c) gb[c] += K<T>().sum(hw, gy + c * hw);
      }
      if (xn.requires_grad) {
        K<T>().gemm(kernels::Trans::yes, kernels::Trans::no, patch, hw, g.out_ch, T(1), wn.value.data(), patch,
                    gy, hw, T(0), dcols.data(), hw);
        detail::col2im_add(g, dcols.data(), xn.ensure_grad().row(r));
      }
    }
  });
}

/// Nearest-neighbour 2x upsampling of [ch x H x W] rows.
template <class T>
Var<T> upsample2x(const Var<T>& x, std::size_t ch, std::size_t h, std::size_t w) {
  require(x.cols() == ch * h * w, "upsample2x: width mismatch");
  const std::size_t n = x.rows(), oh = 2 * h, ow = 2 * w;
  Tensor<T> y(n, ch * oh * ow);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* src = x.value().row(r) + c * h * w;
      T* dst = y.row(r) + c * oh * ow;
      for (std::size_t yy = 0; yy < oh; ++yy) {
        for (std::size_t xx = 0; xx < ow; ++xx) dst[yy * ow + xx] = src[(yy / 2) * w + xx / 2];
      }
    }
  }
  return make_result<T>(std::move(y), {x}, [n, ch, h, w, oh, ow](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < ch; ++c) {
        const T* src = self.grad.row(r) + c * oh * ow;
        T* dst = g.row(r) + c * h * w;
        for (std::size_t yy = 0; yy < oh; ++yy) {
          for (std::size_t xx = 0; xx < ow; ++xx) dst[(yy / 2) * w + xx / 2] += src[yy * ow + xx];
        }
      }
    }
  });
}

}  // namespace seqdiff::ag
