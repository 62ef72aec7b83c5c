#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hbd/network.hpp"

namespace hbd {

/// AdaDelta with an extra multiplier on the step: x += lr * dx.
struct AdaDeltaConfig {
  double rho = 0.9;
  double eps = 1e-6;
  double lr = 0.01;
};

/// Running averages E[g^2] and E[dx^2] for a sequence of parameter blocks.
template <typename Scalar>
struct AdaDeltaState {
  std::vector<VectorX<Scalar>> mean_sq_grad;
  std::vector<VectorX<Scalar>> mean_sq_step;
};

/// One update of a flat block:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x       <- x + lr * dx
template <typename Scalar, typename X, typename G>
void adadelta_update(Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<G>& g, VectorX<Scalar>& mean_sq_grad,
                     VectorX<Scalar>& mean_sq_step, const AdaDeltaConfig& cfg) {
  const auto rho = static_cast<Scalar>(cfg.rho);
  const auto eps = static_cast<Scalar>(cfg.eps);
  const auto lr = static_cast<Scalar>(cfg.lr);
  mean_sq_grad = rho * mean_sq_grad + (Scalar(1) - rho) * g.cwiseAbs2();
  const VectorX<Scalar> step =
      -((mean_sq_step.array() + eps).sqrt() / (mean_sq_grad.array() + eps).sqrt() * g.array()).matrix();
  mean_sq_step = rho * mean_sq_step + (Scalar(1) - rho) * step.cwiseAbs2();
  x += lr * step;
}

/// Zero accumulators shaped like the trainable blocks of `params`.
template <typename Scalar>
AdaDeltaState<Scalar> make_adadelta_state(const NetworkParams<Scalar>& params) {
  AdaDeltaState<Scalar> s;
  for_each_block(params, [&](const std::string&, const auto& m, Part, BlockKind kind) {
    if (kind != BlockKind::Trainable) return;
    s.mean_sq_grad.push_back(VectorX<Scalar>::Zero(m.size()));
    s.mean_sq_step.push_back(VectorX<Scalar>::Zero(m.size()));
  });
  return s;
}

/// Applies one AdaDelta step to every trainable block. With `freeze_conv`
/// the conv part (including its BN affine parameters) is left untouched.
/// Throws before mutating anything if a gradient is non-finite or a shape
/// disagrees.
template <typename Scalar>
void adadelta_step(NetworkParams<Scalar>& params, const NetworkParams<Scalar>& grads, AdaDeltaState<Scalar>& state,
                   const AdaDeltaConfig& cfg, bool freeze_conv = false) {
  std::vector<Eigen::Map<const VectorX<Scalar>>> grad_blocks;
  std::vector<std::string> names;
  for_each_block(grads, [&](const std::string& name, const auto& m, Part, BlockKind kind) {
    if (kind != BlockKind::Trainable) return;
    grad_blocks.emplace_back(m.data(), m.size());
    names.push_back(name);
  });
  if (grad_blocks.size() != state.mean_sq_grad.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match the parameter set");
  }
  std::size_t i = 0;
  for_each_block(params, [&](const std::string& name, const auto& m, Part part, BlockKind kind) {
    if (kind != BlockKind::Trainable) return;
    const auto& g = grad_blocks[i];
    if (g.size() != m.size() || state.mean_sq_grad[i].size() != m.size()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape for " + name);
    }
    if (!(part == Part::Conv && freeze_conv) && !g.allFinite()) {
      throw Error(ErrorCode::NonFiniteGradient, "gradient of " + name);
    }
    ++i;
  });
  i = 0;
  for_each_block(params, [&](const std::string&, auto& m, Part part, BlockKind kind) {
    if (kind != BlockKind::Trainable) return;
    if (!(part == Part::Conv && freeze_conv)) {
      Eigen::Map<VectorX<Scalar>> x(m.data(), m.size());
      adadelta_update(x, grad_blocks[i], state.mean_sq_grad[i], state.mean_sq_step[i], cfg);
    }
    ++i;
  });
}

}  // namespace hbd
