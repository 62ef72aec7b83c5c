#pragma once

// Dense 1-D layer kernels, forward and backward, templated on the scalar type.
// Production code runs them in float; the gradient tests also instantiate
// double.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hbd/error.hpp"
#include "hbd/rng.hpp"

namespace hbd {

using Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Mode { Train, Eval };

/// (batch, channels, length), row-major.
template <typename Scalar>
struct Tensor3 {
  Index batch = 0;
  Index channels = 0;
  Index length = 0;
  VectorX<Scalar> data;

  Tensor3() = default;
  Tensor3(Index b, Index c, Index l) : batch(b), channels(c), length(l), data(VectorX<Scalar>::Zero(b * c * l)) {}

  Scalar& operator()(Index n, Index c, Index l) { return data[(n * channels + c) * length + l]; }
  Scalar operator()(Index n, Index c, Index l) const { return data[(n * channels + c) * length + l]; }

  /// channels x length view of one sample
  auto sample(Index n) {
    return Eigen::Map<MatrixX<Scalar>>(data.data() + n * channels * length, channels, length);
  }
  auto sample(Index n) const {
    return Eigen::Map<const MatrixX<Scalar>>(data.data() + n * channels * length, channels, length);
  }

  bool same_shape(const Tensor3& o) const noexcept {
    return batch == o.batch && channels == o.channels && length == o.length;
  }
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

/// channels x (batch * length) view used by conv and batchnorm
template <typename Scalar>
MatrixX<Scalar> to_channel_major(const Tensor3<Scalar>& x) {
  MatrixX<Scalar> m(x.channels, x.batch * x.length);
  for (Index n = 0; n < x.batch; ++n) m.middleCols(n * x.length, x.length) = x.sample(n);
  return m;
}

template <typename Scalar>
Tensor3<Scalar> from_channel_major(const MatrixX<Scalar>& m, Index batch, Index length) {
  Tensor3<Scalar> x(batch, m.rows(), length);
  for (Index n = 0; n < batch; ++n) x.sample(n) = m.middleCols(n * length, length);
  return x;
}

}  // namespace detail

// ---------------------------------------------------------------- conv1d

/// Same-padded, stride-1 convolution. Weights are out x (in * k) with
/// element (o, c * k + t) multiplying input channel c at offset t - (k - 1) / 2.
template <typename Scalar>
struct ConvCache {
  MatrixX<Scalar> columns;  // (in * k) x (batch * length)
  Index batch = 0, in_channels = 0, length = 0, kernel = 0;
};

template <typename Scalar>
struct ConvGrads {
  Tensor3<Scalar> input;
  MatrixX<Scalar> weight;
  VectorX<Scalar> bias;
};

template <typename Scalar>
Tensor3<Scalar> conv1d_forward(const Tensor3<Scalar>& x, const MatrixX<Scalar>& weight, const VectorX<Scalar>& bias,
                               Index kernel, ConvCache<Scalar>& cache) {
  detail::require_shape(kernel >= 1 && kernel % 2 == 1, "conv kernel must be odd and positive");
  detail::require_shape(weight.cols() == x.channels * kernel, "conv weight columns != in_channels * kernel");
  detail::require_shape(bias.size() == weight.rows(), "conv bias size != out_channels");
  const Index pad = (kernel - 1) / 2;
  const Index L = x.length;

  cache.batch = x.batch;
  cache.in_channels = x.channels;
  cache.length = L;
  cache.kernel = kernel;
  cache.columns.setZero(x.channels * kernel, x.batch * L);
  for (Index n = 0; n < x.batch; ++n) {
    for (Index c = 0; c < x.channels; ++c) {
      for (Index t = 0; t < kernel; ++t) {
        const Index shift = t - pad;
        const Index lo = std::max<Index>(0, -shift);
        const Index hi = std::min<Index>(L, L - shift);
        if (hi <= lo) continue;
        cache.columns.row(c * kernel + t).segment(n * L + lo, hi - lo) = x.sample(n).row(c).segment(lo + shift, hi - lo);
      }
    }
  }
  MatrixX<Scalar> y = weight * cache.columns;
  y.colwise() += bias;
  return detail::from_channel_major(y, x.batch, L);
}

template <typename Scalar>
ConvGrads<Scalar> conv1d_backward(const Tensor3<Scalar>& dy, const MatrixX<Scalar>& weight,
                                  const ConvCache<Scalar>& cache, bool need_input_grad = true) {
  detail::require_shape(dy.batch == cache.batch && dy.length == cache.length && dy.channels == weight.rows(),
                        "conv output gradient shape");
  const Index k = cache.kernel;
  const Index pad = (k - 1) / 2;
  const Index L = cache.length;
  const MatrixX<Scalar> dy_m = detail::to_channel_major(dy);

  ConvGrads<Scalar> g;
  g.weight = dy_m * cache.columns.transpose();
  g.bias = dy_m.rowwise().sum();
  if (!need_input_grad) return g;

  const MatrixX<Scalar> dcols = weight.transpose() * dy_m;
  g.input = Tensor3<Scalar>(cache.batch, cache.in_channels, L);
  for (Index n = 0; n < cache.batch; ++n) {
    auto dx = g.input.sample(n);
    for (Index c = 0; c < cache.in_channels; ++c) {
      for (Index t = 0; t < k; ++t) {
        const Index shift = t - pad;
        const Index lo = std::max<Index>(0, -shift);
        const Index hi = std::min<Index>(L, L - shift);
        if (hi <= lo) continue;
        dx.row(c).segment(lo + shift, hi - lo) += dcols.row(c * k + t).segment(n * L + lo, hi - lo);
      }
    }
  }
  return g;
}

// ----------------------------------------------------------- batchnorm1d

template <typename Scalar>
struct BatchNormParams {
  VectorX<Scalar> gamma, beta, running_mean, running_var;

  static BatchNormParams identity(Index channels) {
    return {VectorX<Scalar>::Ones(channels), VectorX<Scalar>::Zero(channels), VectorX<Scalar>::Zero(channels),
            VectorX<Scalar>::Ones(channels)};
  }
};

template <typename Scalar>
struct BatchNormCache {
  Mode mode = Mode::Eval;
  MatrixX<Scalar> normalized;  // channels x (batch * length)
  VectorX<Scalar> inv_std;
  VectorX<Scalar> batch_mean;
  VectorX<Scalar> batch_var;  // unbiased, for the running estimate
  Index batch = 0, length = 0;
};

template <typename Scalar>
struct BatchNormGrads {
  Tensor3<Scalar> input;
  VectorX<Scalar> gamma, beta;
};

/// Train mode normalizes with the batch statistics over (batch, length) and
/// leaves them in the cache; the caller folds them into the running estimates
/// with update_running_stats. Eval mode uses the running estimates.
template <typename Scalar>
Tensor3<Scalar> batchnorm1d_forward(const Tensor3<Scalar>& x, const BatchNormParams<Scalar>& p, Mode mode, Scalar eps,
                                    BatchNormCache<Scalar>& cache) {
  detail::require_shape(p.gamma.size() == x.channels && p.beta.size() == x.channels &&
                            p.running_mean.size() == x.channels && p.running_var.size() == x.channels,
                        "batchnorm parameter size != channels");
  const Index m = x.batch * x.length;
  MatrixX<Scalar> xm = detail::to_channel_major(x);
  cache.mode = mode;
  cache.batch = x.batch;
  cache.length = x.length;

  if (mode == Mode::Train) {
    if (m < 2) throw Error(ErrorCode::DegenerateBatch, "batch * length = " + std::to_string(m));
    cache.batch_mean = xm.rowwise().mean();
    xm.colwise() -= cache.batch_mean;
    const VectorX<Scalar> sum_sq = xm.rowwise().squaredNorm();
    const VectorX<Scalar> var = sum_sq / static_cast<Scalar>(m);
    cache.batch_var = sum_sq / static_cast<Scalar>(m - 1);
    cache.inv_std = (var.array() + eps).rsqrt();
  } else {
    xm.colwise() -= p.running_mean;
    cache.inv_std = (p.running_var.array() + eps).rsqrt();
  }
  xm = cache.inv_std.asDiagonal() * xm;
  cache.normalized = xm;
  MatrixX<Scalar> y = p.gamma.asDiagonal() * xm;
  y.colwise() += p.beta;
  return detail::from_channel_major(y, x.batch, x.length);
}

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm1d_backward(const Tensor3<Scalar>& dy, const BatchNormParams<Scalar>& p,
                                            const BatchNormCache<Scalar>& cache, bool need_input_grad = true) {
  detail::require_shape(dy.batch == cache.batch && dy.length == cache.length && dy.channels == p.gamma.size(),
                        "batchnorm output gradient shape");
  const MatrixX<Scalar> dy_m = detail::to_channel_major(dy);
  BatchNormGrads<Scalar> g;
  g.beta = dy_m.rowwise().sum();
  g.gamma = dy_m.cwiseProduct(cache.normalized).rowwise().sum();
  if (!need_input_grad) return g;

  MatrixX<Scalar> dx;
  if (cache.mode == Mode::Train) {
    const auto m = static_cast<Scalar>(dy_m.cols());
    // dx = gamma * inv_std / m * (m * dy - sum(dy) - xhat * sum(dy * xhat))
    dx = m * dy_m;
    dx.colwise() -= g.beta;
    dx -= g.gamma.asDiagonal() * cache.normalized;
    const VectorX<Scalar> scale = (p.gamma.array() * cache.inv_std.array() / m).matrix();
    dx = scale.asDiagonal() * dx;
  } else {
    const VectorX<Scalar> scale = p.gamma.cwiseProduct(cache.inv_std);
    dx = scale.asDiagonal() * dy_m;
  }
  g.input = detail::from_channel_major(dx, cache.batch, cache.length);
  return g;
}

/// running <- (1 - momentum) * running + momentum * batch
template <typename Scalar>
void update_running_stats(BatchNormParams<Scalar>& p, const BatchNormCache<Scalar>& cache, Scalar momentum) {
  if (cache.mode != Mode::Train) return;
  p.running_mean = (Scalar(1) - momentum) * p.running_mean + momentum * cache.batch_mean;
  p.running_var = (Scalar(1) - momentum) * p.running_var + momentum * cache.batch_var;
}

// ------------------------------------------------------------------ relu

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.derived().cwiseMax(typename Derived::Scalar(0));
}

/// Gradient passes where the forward input was strictly positive.
template <typename Derived, typename DerivedGrad>
auto relu_backward(const Eigen::MatrixBase<Derived>& input, const Eigen::MatrixBase<DerivedGrad>& dy) {
  using Scalar = typename Derived::Scalar;
  return (input.derived().array() > Scalar(0)).select(dy.derived().array(), Scalar(0)).matrix();
}

// --------------------------------------------------------------- maxpool1d

struct PoolCache {
  std::vector<Index> argmax;  // flat index into the pooled input
  Index batch = 0, channels = 0, in_length = 0;
};

/// Kernel 2, stride 2; an odd trailing element is dropped. Ties route to the
/// first element of the window.
template <typename Scalar>
Tensor3<Scalar> maxpool1d_forward(const Tensor3<Scalar>& x, PoolCache& cache) {
  const Index out_len = x.length / 2;
  Tensor3<Scalar> y(x.batch, x.channels, out_len);
  cache.batch = x.batch;
  cache.channels = x.channels;
  cache.in_length = x.length;
  cache.argmax.resize(static_cast<std::size_t>(y.data.size()));
  std::size_t o = 0;
  for (Index n = 0; n < x.batch; ++n) {
    for (Index c = 0; c < x.channels; ++c) {
      const Index base = (n * x.channels + c) * x.length;
      for (Index i = 0; i < out_len; ++i, ++o) {
        const Index a = base + 2 * i;
        const Index pick = x.data[a] >= x.data[a + 1] ? a : a + 1;
        cache.argmax[o] = pick;
        y.data[static_cast<Index>(o)] = x.data[pick];
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor3<Scalar> maxpool1d_backward(const Tensor3<Scalar>& dy, const PoolCache& cache) {
  detail::require_shape(static_cast<std::size_t>(dy.data.size()) == cache.argmax.size(), "maxpool gradient shape");
  Tensor3<Scalar> dx(cache.batch, cache.channels, cache.in_length);
  for (std::size_t o = 0; o < cache.argmax.size(); ++o) dx.data[cache.argmax[o]] += dy.data[static_cast<Index>(o)];
  return dx;
}

// ----------------------------------------------------------------- linear

template <typename Scalar>
struct LinearGrads {
  MatrixX<Scalar> input, weight;
  VectorX<Scalar> bias;
};

/// y = x W^T + b, x is batch x in, W is out x in.
template <typename Scalar>
MatrixX<Scalar> linear_forward(const MatrixX<Scalar>& x, const MatrixX<Scalar>& weight, const VectorX<Scalar>& bias) {
  detail::require_shape(x.cols() == weight.cols(), "linear input width != weight columns");
  detail::require_shape(bias.size() == weight.rows(), "linear bias size != out features");
  MatrixX<Scalar> y = x * weight.transpose();
  y.rowwise() += bias.transpose();
  return y;
}

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const MatrixX<Scalar>& dy, const MatrixX<Scalar>& x, const MatrixX<Scalar>& weight,
                                    bool need_input_grad = true) {
  detail::require_shape(dy.rows() == x.rows() && dy.cols() == weight.rows(), "linear gradient shape");
  LinearGrads<Scalar> g;
  g.weight = dy.transpose() * x;
  g.bias = dy.colwise().sum().transpose();
  if (need_input_grad) g.input = dy * weight;
  return g;
}

// ---------------------------------------------------------------- dropout

/// Inverted dropout. In train mode each element is kept with probability
/// 1 - p (decided by rng.uniform() >= p, row-major order) and scaled by
/// 1 / (1 - p); `mask` receives the applied factor per element.
template <typename Scalar>
MatrixX<Scalar> dropout_forward(const MatrixX<Scalar>& x, double p, Mode mode, Xoshiro256& rng, MatrixX<Scalar>& mask) {
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidProbability, "dropout p = " + std::to_string(p));
  if (mode == Mode::Eval || p == 0.0) {
    mask.setOnes(x.rows(), x.cols());
    return x;
  }
  const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - p));
  mask.resize(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() >= p ? keep_scale : Scalar(0);
  return x.cwiseProduct(mask);
}

template <typename Scalar>
MatrixX<Scalar> dropout_backward(const MatrixX<Scalar>& dy, const MatrixX<Scalar>& mask) {
  detail::require_shape(dy.rows() == mask.rows() && dy.cols() == mask.cols(), "dropout gradient shape");
  return dy.cwiseProduct(mask);
}

// ---------------------------------------------------------------- softmax

/// Row-wise softmax with max subtraction.
template <typename Scalar>
MatrixX<Scalar> softmax(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> p = logits;
  for (Index i = 0; i < p.rows(); ++i) {
    p.row(i).array() -= p.row(i).maxCoeff();
    p.row(i) = p.row(i).array().exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace hbd
