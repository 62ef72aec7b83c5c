#pragma once

#include <cmath>
#include <span>

#include "hbd/dataset.hpp"
#include "hbd/layers.hpp"

namespace hbd {

struct ClassWeights {
  double no_beat = 0.06;
  double beat = 0.94;

  double operator[](Label label) const noexcept { return label == Label::Beat ? beat : no_beat; }
};

enum class Reduction { WeightedMean, Sum };

template <typename Scalar>
struct LossResult {
  double loss = 0.0;
  MatrixX<Scalar> dlogits;  // batch x 2
};

/// Weighted cross-entropy on two-class logits. With WeightedMean the sum of
/// w_i * -log softmax(z_i)[y_i] is divided by the sum of w_i; `dlogits` is the
/// exact gradient of the returned scalar.
template <typename Scalar>
LossResult<Scalar> weighted_cross_entropy(const MatrixX<Scalar>& logits, std::span<const Label> labels,
                                          const ClassWeights& weights, Reduction reduction = Reduction::WeightedMean) {
  if (logits.rows() == 0 || labels.empty()) throw Error(ErrorCode::EmptyBatch, "loss over an empty batch");
  detail::require_shape(logits.cols() == 2 && static_cast<std::size_t>(logits.rows()) == labels.size(),
                        "logits must be batch x 2 and match the label count");
  if (!(weights.beat > 0.0 && weights.no_beat > 0.0)) throw Error(ErrorCode::InvalidConfig, "class weights must be positive");

  LossResult<Scalar> out;
  out.dlogits.resize(logits.rows(), 2);
  double total = 0.0;
  double weight_sum = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    const double z0 = logits(i, 0);
    const double z1 = logits(i, 1);
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const int y = labels[static_cast<std::size_t>(i)] == Label::Beat ? 1 : 0;
    const double w = weights[labels[static_cast<std::size_t>(i)]];
    total += w * (lse - (y == 1 ? z1 : z0));
    weight_sum += w;
    const double p1 = std::exp(z1 - lse);
    out.dlogits(i, 0) = static_cast<Scalar>(w * ((1.0 - p1) - (y == 0 ? 1.0 : 0.0)));
    out.dlogits(i, 1) = static_cast<Scalar>(w * (p1 - (y == 1 ? 1.0 : 0.0)));
  }
  const double norm = reduction == Reduction::WeightedMean ? weight_sum : 1.0;
  out.loss = total / norm;
  out.dlogits /= static_cast<Scalar>(norm);
  return out;
}

}  // namespace hbd
