#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hbd/layers.hpp"

namespace hbd {

struct ConvBlockConfig {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel_size = 1;

  friend bool operator==(const ConvBlockConfig&, const ConvBlockConfig&) = default;
};

/// Four BatchNorm -> Conv1D -> ReLU -> MaxPool blocks, then Dropout and three
/// fully connected layers (ReLU between them, none after the last).
struct NetworkConfig {
  std::array<ConvBlockConfig, 4> conv_blocks{{{1, 8, 7}, {8, 16, 5}, {16, 32, 5}, {32, 64, 3}}};
  std::array<Index, 3> fc_sizes{128, 32, 2};
  double dropout_p = 0.5;
  Index pool_kernel = 2;
  Index input_length = 250;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;

  /// Length after the conv part (250 -> 125 -> 62 -> 31 -> 15).
  Index trunk_length() const noexcept {
    Index len = input_length;
    for (std::size_t i = 0; i < conv_blocks.size(); ++i) len /= pool_kernel;
    return len;
  }
  Index flatten_width() const noexcept { return conv_blocks.back().out_channels * trunk_length(); }
};

/// Throws InvalidConfig on broken chaining, even kernels, or a head that is
/// not two classes wide.
void validate(const NetworkConfig& config);

template <typename Scalar>
struct ConvBlockParams {
  BatchNormParams<Scalar> bn;
  MatrixX<Scalar> weight;  // out x (in * k)
  VectorX<Scalar> bias;
};

template <typename Scalar>
struct LinearParams {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;
};

/// Also used for gradients, where the running statistics stay zero.
template <typename Scalar>
struct NetworkParams {
  std::array<ConvBlockParams<Scalar>, 4> conv;
  std::array<LinearParams<Scalar>, 3> fc;

  template <typename Other>
  NetworkParams<Other> cast() const {
    NetworkParams<Other> out;
    for (std::size_t i = 0; i < conv.size(); ++i) {
      out.conv[i].bn = {conv[i].bn.gamma.template cast<Other>(), conv[i].bn.beta.template cast<Other>(),
                        conv[i].bn.running_mean.template cast<Other>(), conv[i].bn.running_var.template cast<Other>()};
      out.conv[i].weight = conv[i].weight.template cast<Other>();
      out.conv[i].bias = conv[i].bias.template cast<Other>();
    }
    for (std::size_t j = 0; j < fc.size(); ++j) {
      out.fc[j].weight = fc[j].weight.template cast<Other>();
      out.fc[j].bias = fc[j].bias.template cast<Other>();
    }
    return out;
  }
};

enum class Part { Conv, FullyConnected };
enum class BlockKind { Trainable, RunningStat };

/// Visits every parameter block in the declared (checkpoint) order:
/// per conv block bn.gamma, bn.beta, bn.running_mean, bn.running_var,
/// weight, bias; then per FC layer weight, bias. `fn(name, block, part, kind)`
/// receives the Eigen object by reference.
template <typename Params, typename Fn>
void for_each_block(Params& params, Fn&& fn) {
  for (std::size_t i = 0; i < params.conv.size(); ++i) {
    const std::string prefix = "conv" + std::to_string(i) + ".";
    auto& b = params.conv[i];
    fn(prefix + "bn.gamma", b.bn.gamma, Part::Conv, BlockKind::Trainable);
    fn(prefix + "bn.beta", b.bn.beta, Part::Conv, BlockKind::Trainable);
    fn(prefix + "bn.running_mean", b.bn.running_mean, Part::Conv, BlockKind::RunningStat);
    fn(prefix + "bn.running_var", b.bn.running_var, Part::Conv, BlockKind::RunningStat);
    fn(prefix + "weight", b.weight, Part::Conv, BlockKind::Trainable);
    fn(prefix + "bias", b.bias, Part::Conv, BlockKind::Trainable);
  }
  for (std::size_t j = 0; j < params.fc.size(); ++j) {
    const std::string prefix = "fc" + std::to_string(j) + ".";
    fn(prefix + "weight", params.fc[j].weight, Part::FullyConnected, BlockKind::Trainable);
    fn(prefix + "bias", params.fc[j].bias, Part::FullyConnected, BlockKind::Trainable);
  }
}

/// Zero-filled parameters with the shapes implied by `config`.
template <typename Scalar>
NetworkParams<Scalar> zero_params(const NetworkConfig& config) {
  NetworkParams<Scalar> p;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& c = config.conv_blocks[i];
    p.conv[i].bn = {VectorX<Scalar>::Zero(c.in_channels), VectorX<Scalar>::Zero(c.in_channels),
                    VectorX<Scalar>::Zero(c.in_channels), VectorX<Scalar>::Zero(c.in_channels)};
    p.conv[i].weight = MatrixX<Scalar>::Zero(c.out_channels, c.in_channels * c.kernel_size);
    p.conv[i].bias = VectorX<Scalar>::Zero(c.out_channels);
  }
  Index in = config.flatten_width();
  for (std::size_t j = 0; j < 3; ++j) {
    p.fc[j].weight = MatrixX<Scalar>::Zero(config.fc_sizes[j], in);
    p.fc[j].bias = VectorX<Scalar>::Zero(config.fc_sizes[j]);
    in = config.fc_sizes[j];
  }
  return p;
}

/// True when every block of `params` has the shape `config` implies.
template <typename Scalar>
bool shapes_match(const NetworkConfig& config, const NetworkParams<Scalar>& params) {
  const auto ref = zero_params<Scalar>(config);
  std::vector<std::pair<Index, Index>> expected;
  for_each_block(ref, [&](const std::string&, const auto& m, Part, BlockKind) { expected.emplace_back(m.rows(), m.cols()); });
  std::size_t i = 0;
  bool ok = true;
  for_each_block(params, [&](const std::string&, const auto& m, Part, BlockKind) {
    ok = ok && expected[i].first == m.rows() && expected[i].second == m.cols();
    ++i;
  });
  return ok;
}

/// Weights and biases uniform in +-sqrt(1 / fan_in) (fan_in = in * k for
/// conv, in for FC), drawn block by block in declared order; BN gamma = 1,
/// beta = 0, running mean 0, running var 1.
template <typename Scalar>
NetworkParams<Scalar> init_params(const NetworkConfig& config, std::uint64_t seed) {
  validate(config);
  auto p = zero_params<Scalar>(config);
  Xoshiro256 rng(seed);
  auto fill = [&rng](auto& m, double bound) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
  };
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& c = config.conv_blocks[i];
    p.conv[i].bn = BatchNormParams<Scalar>::identity(c.in_channels);
    const double bound = std::sqrt(1.0 / static_cast<double>(c.in_channels * c.kernel_size));
    fill(p.conv[i].weight, bound);
    fill(p.conv[i].bias, bound);
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const double bound = std::sqrt(1.0 / static_cast<double>(p.fc[j].weight.cols()));
    fill(p.fc[j].weight, bound);
    fill(p.fc[j].bias, bound);
  }
  return p;
}

struct ForwardOptions {
  Mode mode = Mode::Eval;
  /// Run the conv part with its running statistics even in train mode (the
  /// frozen trunk of transfer learning).
  bool trunk_frozen = false;
};

template <typename Scalar>
struct ForwardCache {
  struct Block {
    BatchNormCache<Scalar> bn;
    ConvCache<Scalar> conv;
    Tensor3<Scalar> pre_activation;
    PoolCache pool;
  };
  std::array<Block, 4> blocks;
  MatrixX<Scalar> dropout_mask;
  std::array<MatrixX<Scalar>, 3> fc_inputs;
  std::array<MatrixX<Scalar>, 3> fc_outputs;  // pre-activation
  ForwardOptions options;
  Index batch = 0;
};

/// Logits (batch x 2) for a (batch, 1, input_length) batch. Parameters are
/// never mutated; train-mode batch statistics are left in the cache.
template <typename Scalar>
MatrixX<Scalar> forward(const NetworkConfig& config, const NetworkParams<Scalar>& params, const Tensor3<Scalar>& batch,
                        ForwardOptions options, Xoshiro256& rng, ForwardCache<Scalar>& cache) {
  detail::require_shape(batch.channels == config.conv_blocks[0].in_channels && batch.length == config.input_length,
                        "network input must be (n, " + std::to_string(config.conv_blocks[0].in_channels) + ", " +
                            std::to_string(config.input_length) + ")");
  detail::require_shape(batch.batch >= 1, "empty batch");
  cache.options = options;
  cache.batch = batch.batch;
  const auto eps = static_cast<Scalar>(config.bn_eps);
  const Mode trunk_mode = options.trunk_frozen ? Mode::Eval : options.mode;

  Tensor3<Scalar> x = batch;
  for (std::size_t i = 0; i < 4; ++i) {
    auto& c = cache.blocks[i];
    const auto& p = params.conv[i];
    x = batchnorm1d_forward(x, p.bn, trunk_mode, eps, c.bn);
    c.pre_activation = conv1d_forward(x, p.weight, p.bias, config.conv_blocks[i].kernel_size, c.conv);
    x = c.pre_activation;
    x.data = relu(x.data);
    x = maxpool1d_forward(x, c.pool);
  }

  MatrixX<Scalar> h = Eigen::Map<const MatrixX<Scalar>>(x.data.data(), x.batch, x.channels * x.length);
  h = dropout_forward(h, config.dropout_p, options.mode, rng, cache.dropout_mask);
  for (std::size_t j = 0; j < 3; ++j) {
    cache.fc_inputs[j] = h;
    cache.fc_outputs[j] = linear_forward(h, params.fc[j].weight, params.fc[j].bias);
    h = j + 1 < 3 ? MatrixX<Scalar>(relu(cache.fc_outputs[j])) : cache.fc_outputs[j];
  }
  return h;
}

/// Convenience eval-mode forward.
template <typename Scalar>
MatrixX<Scalar> predict_logits(const NetworkConfig& config, const NetworkParams<Scalar>& params,
                               const Tensor3<Scalar>& batch) {
  Xoshiro256 unused(0);
  ForwardCache<Scalar> cache;
  return forward(config, params, batch, {Mode::Eval, false}, unused, cache);
}

/// Gradients of the loss with respect to every trainable block, given
/// dL/dlogits. With `skip_trunk` the conv part is not differentiated and its
/// gradient blocks stay zero.
template <typename Scalar>
NetworkParams<Scalar> backward(const NetworkConfig& config, const NetworkParams<Scalar>& params,
                               const ForwardCache<Scalar>& cache, const MatrixX<Scalar>& dlogits,
                               bool skip_trunk = false) {
  detail::require_shape(dlogits.rows() == cache.batch && dlogits.cols() == config.fc_sizes.back(),
                        "logit gradient shape");
  auto grads = zero_params<Scalar>(config);

  MatrixX<Scalar> dh = dlogits;
  for (std::size_t j = 3; j-- > 0;) {
    if (j + 1 < 3) dh = relu_backward(cache.fc_outputs[j], dh);
    auto g = linear_backward(dh, cache.fc_inputs[j], params.fc[j].weight, j > 0 || !skip_trunk);
    grads.fc[j].weight = std::move(g.weight);
    grads.fc[j].bias = std::move(g.bias);
    dh = std::move(g.input);
  }
  if (skip_trunk) return grads;

  dh = dropout_backward(dh, cache.dropout_mask);
  const auto& last = config.conv_blocks.back();
  Tensor3<Scalar> dx(cache.batch, last.out_channels, config.trunk_length());
  dx.data = Eigen::Map<const VectorX<Scalar>>(dh.data(), dh.size());

  for (std::size_t i = 4; i-- > 0;) {
    const auto& c = cache.blocks[i];
    dx = maxpool1d_backward(dx, c.pool);
    dx.data = relu_backward(c.pre_activation.data, dx.data);
    auto gc = conv1d_backward(dx, params.conv[i].weight, c.conv);
    grads.conv[i].weight = std::move(gc.weight);
    grads.conv[i].bias = std::move(gc.bias);
    auto gb = batchnorm1d_backward(gc.input, params.conv[i].bn, c.bn, i > 0);
    grads.conv[i].bn.gamma = std::move(gb.gamma);
    grads.conv[i].bn.beta = std::move(gb.beta);
    dx = std::move(gb.input);
  }
  return grads;
}

/// Folds the batch statistics of a train-mode forward into the running
/// estimates. No-op for a frozen trunk.
template <typename Scalar>
void update_running_stats(const NetworkConfig& config, NetworkParams<Scalar>& params, const ForwardCache<Scalar>& cache) {
  if (cache.options.mode != Mode::Train || cache.options.trunk_frozen) return;
  for (std::size_t i = 0; i < 4; ++i) {
    update_running_stats(params.conv[i].bn, cache.blocks[i].bn, static_cast<Scalar>(config.bn_momentum));
  }
}

}  // namespace hbd
