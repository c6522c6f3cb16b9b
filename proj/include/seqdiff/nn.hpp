#pragma once
// Parameterized layers on top of the autograd ops, plus AdamW.

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seqdiff/autograd.hpp"
#include "seqdiff/random.hpp"

namespace seqdiff::nn {

using ag::Var;

/// Named parameter registry. Names are unique and stable across runs; they
/// key the checkpoint sections.
template <class T>
class ParamSet {
 public:
  Var<T> create(const std::string& name, std::size_t rows, std::size_t cols, double init_std, Rng& rng) {
    require(index_.find(name) == index_.end(), "duplicate parameter " + name);
    Tensor<T> v(rows, cols);
    if (init_std > 0) {
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(init_std * rng.normal());
    }
    return insert(name, std::move(v));
  }
  Var<T> create_const(const std::string& name, std::size_t rows, std::size_t cols, T value) {
    require(index_.find(name) == index_.end(), "duplicate parameter " + name);
    return insert(name, Tensor<T>(rows, cols, value));
  }

  const std::vector<std::pair<std::string, Var<T>>>& items() const { return items_; }
  Var<T> get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter " + name);
    return items_[it->second].second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad() {
    for (auto& [_, v] : items_) v.zero_grad();
  }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : items_) n += v.value().size();
    return n;
  }

 private:
  Var<T> insert(const std::string& name, Tensor<T> v) {
    auto var = Var<T>::leaf(std::move(v));
    index_[name] = items_.size();
    items_.emplace_back(name, var);
    return var;
  }

  std::vector<std::pair<std::string, Var<T>>> items_;
  std::map<std::string, std::size_t> index_;
};

template <class T>
struct Linear {
  Var<T> w, b;
  std::size_t in = 0, out = 0;

  Linear() = default;
  Linear(ParamSet<T>& ps, const std::string& name, std::size_t in_dim, std::size_t out_dim, Rng& rng,
         bool bias = true, double gain = 1.0)
      : in(in_dim), out(out_dim) {
    w = ps.create(name + ".w", out_dim, in_dim, gain / std::sqrt(static_cast<double>(in_dim)), rng);
    if (bias) b = ps.create(name + ".b", 1, out_dim, 0.0, rng);
  }
  Var<T> operator()(const Var<T>& x) const { return ag::linear(x, w, b.defined() ? &b : nullptr); }
};

template <class T>
struct Conv2d {
  Var<T> w, b;
  ag::ConvGeometry geom{};

  Conv2d() = default;
  Conv2d(ParamSet<T>& ps, const std::string& name, ag::ConvGeometry g, Rng& rng, double gain = 1.0) : geom(g) {
    w = ps.create(name + ".w", g.out_ch, g.patch(), gain / std::sqrt(static_cast<double>(g.patch())), rng);
    b = ps.create(name + ".b", 1, g.out_ch, 0.0, rng);
  }
  Var<T> operator()(const Var<T>& x) const { return ag::conv2d(x, w, b, geom); }
};

/// Unidirectional LSTM with zero initial state. Output at step t depends only
/// on inputs 0..t.
template <class T>
struct Lstm {
  Linear<T> ih, hh;
  std::size_t hidden = 0;

  Lstm() = default;
  Lstm(ParamSet<T>& ps, const std::string& name, std::size_t in_dim, std::size_t hidden_dim, Rng& rng)
      : hidden(hidden_dim) {
    ih = Linear<T>(ps, name + ".ih", in_dim, 4 * hidden_dim, rng);
    hh = Linear<T>(ps, name + ".hh", hidden_dim, 4 * hidden_dim, rng, false);
    // forget-gate bias starts at 1
    auto& bv = ih.b.mutable_value();
    for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) bv[j] = T(1);
  }

  /// xs[t] is [B x in]. Returns h[t] for every step.
  std::vector<Var<T>> run(const std::vector<Var<T>>& xs) const {
    require(!xs.empty(), "lstm: empty sequence");
    const std::size_t batch = xs[0].rows();
    std::vector<Var<T>> hs;
    hs.reserve(xs.size());
    Var<T> h, c;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      Var<T> gates = ih(xs[t]);
      if (t > 0) gates = ag::add(gates, hh(h));
      auto i = ag::sigmoid(ag::slice_cols(gates, 0, hidden));
      auto f = ag::sigmoid(ag::slice_cols(gates, hidden, hidden));
      auto g = ag::tanh(ag::slice_cols(gates, 2 * hidden, hidden));
      auto o = ag::sigmoid(ag::slice_cols(gates, 3 * hidden, hidden));
      c = t > 0 ? ag::add(ag::mul(f, c), ag::mul(i, g)) : ag::mul(i, g);
      h = ag::mul(o, ag::tanh(c));
      hs.push_back(h);
    }
    (void)batch;
    return hs;
  }
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// Adam with decoupled weight decay.
template <class T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamSet<T>& ps, AdamWConfig cfg) : cfg_(cfg) {
    for (const auto& [name, v] : ps.items()) slots_.push_back(Slot{name, v, Tensor<T>(v.rows(), v.cols()), Tensor<T>(v.rows(), v.cols())});
  }

  void step() {
    ++t_;
    const T bias1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T bias2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    for (auto& s : slots_) {
      auto& w = s.param.mutable_value();
      if (s.param.grad().empty()) continue;
      kernels::table<T>().adamw(w.size(), w.data(), s.param.grad().data(), s.m.data(), s.v.data(),
                                static_cast<T>(cfg_.lr), static_cast<T>(cfg_.beta1), static_cast<T>(cfg_.beta2),
                                static_cast<T>(cfg_.eps), static_cast<T>(cfg_.weight_decay), bias1, bias2);
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  const AdamWConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }

  struct Slot {
    std::string name;
    Var<T> param;
    Tensor<T> m, v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  AdamWConfig cfg_;
  std::vector<Slot> slots_;
  std::uint64_t t_ = 0;
};

/// Sinusoidal features of a per-row scalar: [cos(x f_i), sin(x f_i)] with
/// geometric frequencies f_i = 10000^(-i/half) scaled by `base`.
template <class T>
Tensor<T> sinusoidal_embedding(const std::vector<T>& x, std::size_t dim, double base = 1.0) {
  const std::size_t half = dim / 2;
  Tensor<T> e(x.size(), dim);
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t i = 0; i < half; ++i) {
      const double f = base * std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
      e(r, i) = static_cast<T>(std::cos(static_cast<double>(x[r]) * f));
      e(r, half + i) = static_cast<T>(std::sin(static_cast<double>(x[r]) * f));
    }
  }
  return e;
}

}  // namespace seqdiff::nn
