#pragma once

// Central finite-difference oracles for every differentiable piece. Each
// check_* draws `configs` random small shapes and returns the worst
// per-element relative error |a - n| / max(|a|, |n|, floor) it saw.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hbd/layers.hpp"
#include "hbd/loss.hpp"
#include "hbd/network.hpp"
#include "hbd/rng.hpp"

namespace hbd::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t configs = 0;

  void merge(const GradCheck& o) {
    max_rel_error = std::max(max_rel_error, o.max_rel_error);
    checked += o.checked;
    configs += o.configs;
  }
};

inline constexpr double kStep = 1e-5;
inline constexpr double kFloor = 1e-6;

inline double rel_error(double analytic, double numeric, double floor = kFloor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic[i] with the central difference of f around values[i].
template <typename Scalar>
void compare(GradCheck& out, Scalar* values, const Scalar* analytic, Index n, const std::function<double()>& f,
             double step = kStep, double floor = kFloor) {
  for (Index i = 0; i < n; ++i) {
    const Scalar saved = values[i];
    values[i] = saved + static_cast<Scalar>(step);
    const double up = f();
    values[i] = saved - static_cast<Scalar>(step);
    const double down = f();
    values[i] = saved;
    out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic[i], (up - down) / (2 * step), floor));
    ++out.checked;
  }
}

inline Index pick(Xoshiro256& rng, Index lo, Index hi) { return lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

template <typename Derived>
void fill_uniform(Eigen::PlainObjectBase<Derived>& m, Xoshiro256& rng, double lo = -1.0, double hi = 1.0) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<typename Derived::Scalar>(lo + (hi - lo) * rng.uniform());
}

inline Tensor3<double> random_tensor(Xoshiro256& rng, Index b, Index c, Index l) {
  Tensor3<double> t(b, c, l);
  fill_uniform(t.data, rng);
  return t;
}

/// Values well away from 0 and from each other, so relu and max have no kink
/// within a finite-difference step.
inline Tensor3<double> separated_tensor(Xoshiro256& rng, Index b, Index c, Index l) {
  Tensor3<double> t(b, c, l);
  std::vector<double> grid(static_cast<std::size_t>(t.data.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = (static_cast<double>(i) + 0.5) * 0.05 + 0.01 * rng.uniform();
  rng.shuffle(std::span(grid));
  const double shift = 0.05 * static_cast<double>(grid.size()) / 2.0 + 0.0251;
  for (std::size_t i = 0; i < grid.size(); ++i) t.data[static_cast<Index>(i)] = grid[i] - shift;
  return t;
}

inline double dot(const VectorX<double>& a, const VectorX<double>& b) { return a.dot(b); }

inline GradCheck check_conv1d(std::size_t configs, std::uint64_t seed) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const Index b = pick(rng, 1, 3), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3), k = 2 * pick(rng, 0, 3) + 1,
                l = pick(rng, 3, 12);
    auto x = random_tensor(rng, b, cin, l);
    MatrixX<double> w(cout, cin * k);
    VectorX<double> bias(cout);
    fill_uniform(w, rng);
    fill_uniform(bias, rng);
    auto r = random_tensor(rng, b, cout, l);
    ConvCache<double> cache;
    auto loss = [&] {
      ConvCache<double> tmp;
      return dot(conv1d_forward(x, w, bias, k, tmp).data, r.data);
    };
    conv1d_forward(x, w, bias, k, cache);
    const auto g = conv1d_backward(r, w, cache);
    compare(out, x.data.data(), g.input.data.data(), x.data.size(), loss);
    compare(out, w.data(), g.weight.data(), w.size(), loss);
    compare(out, bias.data(), g.bias.data(), bias.size(), loss);
    ++out.configs;
  }
  return out;
}

inline GradCheck check_batchnorm1d(std::size_t configs, std::uint64_t seed) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const Index b = pick(rng, 1, 4), ch = pick(rng, 1, 3), l = pick(rng, 2, 8);
    const Mode mode = c % 4 == 3 ? Mode::Eval : Mode::Train;
    auto x = random_tensor(rng, b, ch, l);
    auto p = BatchNormParams<double>::identity(ch);
    fill_uniform(p.gamma, rng, 0.5, 1.5);
    fill_uniform(p.beta, rng);
    fill_uniform(p.running_mean, rng);
    fill_uniform(p.running_var, rng, 0.5, 2.0);
    auto r = random_tensor(rng, b, ch, l);
    auto loss = [&] {
      BatchNormCache<double> tmp;
      return dot(batchnorm1d_forward(x, p, mode, 1e-5, tmp).data, r.data);
    };
    BatchNormCache<double> cache;
    batchnorm1d_forward(x, p, mode, 1e-5, cache);
    const auto g = batchnorm1d_backward(r, p, cache);
    compare(out, x.data.data(), g.input.data.data(), x.data.size(), loss);
    compare(out, p.gamma.data(), g.gamma.data(), p.gamma.size(), loss);
    compare(out, p.beta.data(), g.beta.data(), p.beta.size(), loss);
    ++out.configs;
  }
  return out;
}

inline GradCheck check_relu(std::size_t configs, std::uint64_t seed) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    auto x = separated_tensor(rng, pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 2, 10));
    auto r = random_tensor(rng, x.batch, x.channels, x.length);
    auto loss = [&] { return relu(x.data).dot(r.data); };
    const VectorX<double> g = relu_backward(x.data, r.data);
    compare(out, x.data.data(), g.data(), x.data.size(), loss);
    ++out.configs;
  }
  return out;
}

inline GradCheck check_maxpool1d(std::size_t configs, std::uint64_t seed) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    auto x = separated_tensor(rng, pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 2, 11));
    auto r = random_tensor(rng, x.batch, x.channels, x.length / 2);
    auto loss = [&] {
      PoolCache tmp;
      return dot(maxpool1d_forward(x, tmp).data, r.data);
    };
    PoolCache cache;
    maxpool1d_forward(x, cache);
    const auto g = maxpool1d_backward(r, cache);
    compare(out, x.data.data(), g.data.data(), x.data.size(), loss);
    ++out.configs;
  }
  return out;
}

inline GradCheck check_linear(std::size_t configs, std::uint64_t seed) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const Index b = pick(rng, 1, 4), in = pick(rng, 1, 6), o = pick(rng, 1, 5);
    MatrixX<double> x(b, in), w(o, in), r(b, o);
    VectorX<double> bias(o);
    fill_uniform(x, rng);
    fill_uniform(w, rng);
    fill_uniform(r, rng);
    fill_uniform(bias, rng);
    auto loss = [&] { return linear_forward(x, w, bias).cwiseProduct(r).sum(); };
    const auto g = linear_backward(r, x, w);
    compare(out, x.data(), g.input.data(), x.size(), loss);
    compare(out, w.data(), g.weight.data(), w.size(), loss);
    compare(out, bias.data(), g.bias.data(), bias.size(), loss);
    ++out.configs;
  }
  return out;
}

inline GradCheck check_dropout(std::size_t configs, std::uint64_t seed) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    MatrixX<double> x(pick(rng, 1, 4), pick(rng, 1, 6)), r;
    fill_uniform(x, rng);
    r.resizeLike(x);
    fill_uniform(r, rng);
    const auto stream = rng();
    auto loss = [&] {
      Xoshiro256 local(stream);
      MatrixX<double> mask;
      return dropout_forward(x, 0.5, Mode::Train, local, mask).cwiseProduct(r).sum();
    };
    Xoshiro256 local(stream);
    MatrixX<double> mask;
    dropout_forward(x, 0.5, Mode::Train, local, mask);
    const MatrixX<double> g = dropout_backward(r, mask);
    compare(out, x.data(), g.data(), x.size(), loss);
    ++out.configs;
  }
  return out;
}

inline std::vector<Label> random_labels(Xoshiro256& rng, Index n) {
  std::vector<Label> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = rng.uniform() < 0.3 ? Label::Beat : Label::NoBeat;
  return labels;
}

inline GradCheck check_loss(std::size_t configs, std::uint64_t seed) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    MatrixX<double> logits(pick(rng, 1, 8), 2);
    fill_uniform(logits, rng, -3.0, 3.0);
    const auto labels = random_labels(rng, logits.rows());
    const ClassWeights w{0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform()};
    const auto reduction = c % 2 == 0 ? Reduction::WeightedMean : Reduction::Sum;
    auto loss = [&] { return weighted_cross_entropy(logits, labels, w, reduction).loss; };
    const auto g = weighted_cross_entropy(logits, labels, w, reduction).dlogits;
    compare(out, logits.data(), g.data(), logits.size(), loss);
    ++out.configs;
  }
  return out;
}

/// A small random architecture that still has four conv/pool blocks.
inline NetworkConfig random_network_config(Xoshiro256& rng) {
  NetworkConfig cfg;
  Index in = 1;
  for (auto& b : cfg.conv_blocks) {
    b = {in, pick(rng, 1, 3), 2 * pick(rng, 0, 2) + 1};
    in = b.out_channels;
  }
  cfg.input_length = pick(rng, 16, 40);
  cfg.fc_sizes = {pick(rng, 2, 6), pick(rng, 2, 5), 2};
  cfg.dropout_p = rng.uniform() < 0.5 ? 0.0 : 0.5;
  return cfg;
}

/// Collects pointers to every element of the trainable blocks, in declared order.
template <typename Scalar>
std::vector<Scalar*> trainable_elements(NetworkParams<Scalar>& p) {
  std::vector<Scalar*> out;
  for_each_block(p, [&](const std::string&, auto& m, Part, BlockKind kind) {
    if (kind != BlockKind::Trainable) return;
    for (Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
  });
  return out;
}

/// Full network in train mode (batch statistics, fixed dropout stream) under
/// the weighted loss. The analytic gradient is computed in Scalar; the finite
/// differences always run in double on the same parameters.
template <typename Scalar>
GradCheck check_network(std::size_t configs, std::uint64_t seed, std::size_t params_per_config, double floor) {
  GradCheck out;
  Xoshiro256 rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const auto cfg = random_network_config(rng);
    auto params_d = init_params<double>(cfg, rng());
    for (auto& block : params_d.conv) {
      fill_uniform(block.bn.gamma, rng, 0.5, 1.5);
      fill_uniform(block.bn.beta, rng, -0.2, 0.2);
    }
    const Index batch = pick(rng, 2, 4);
    auto x = random_tensor(rng, batch, 1, cfg.input_length);
    const auto labels = random_labels(rng, batch);
    const auto stream = rng();
    const ForwardOptions options{Mode::Train, false};

    // Analytic gradient in Scalar.
    auto params_s = params_d.template cast<Scalar>();
    Tensor3<Scalar> xs(x.batch, x.channels, x.length);
    xs.data = x.data.template cast<Scalar>();
    // Round the double copy to what Scalar actually holds.
    params_d = params_s.template cast<double>();
    x.data = xs.data.template cast<double>();

    Xoshiro256 rs(stream);
    ForwardCache<Scalar> cache;
    const auto logits = forward(cfg, params_s, xs, options, rs, cache);
    const auto loss = weighted_cross_entropy(logits, labels, ClassWeights{});
    auto grads = backward(cfg, params_s, cache, loss.dlogits);

    auto f = [&] {
      Xoshiro256 r(stream);
      ForwardCache<double> tmp;
      return weighted_cross_entropy(forward(cfg, params_d, x, options, r, tmp), labels, ClassWeights{}).loss;
    };
    auto values = trainable_elements(params_d);
    auto analytic = trainable_elements(grads);
    for (std::size_t k = 0; k < params_per_config; ++k) {
      const auto i = static_cast<std::size_t>(rng.below(values.size()));
      const double a = static_cast<double>(*analytic[i]);
      compare<double>(out, values[i], &a, 1, f, kStep, floor);
    }
    ++out.configs;
  }
  return out;
}

}  // namespace hbd::testing
