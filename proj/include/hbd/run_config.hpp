#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hbd/metrics.hpp"
#include "hbd/trainer.hpp"

namespace hbd {

/// Everything a run depends on. Serialized as sectioned key=value text:
///
///   [run]      seed
///   [dataset]  train_fraction, max_duration, beat_codes
///   [network]  conv_channels, kernel_sizes, fc_sizes, dropout_p, bn_eps, bn_momentum
///   [train]    epochs, batch_size, lr, rho, eps, weight_nobeat, weight_beat,
///              reduction (weighted_mean | sum), reinit_head
///   [evaluate] bootstrap_repetitions, bootstrap_fraction, confidence
///
/// Lists are comma-separated. Missing keys keep their defaults; unknown keys
/// are rejected.
struct RunConfig {
  std::uint64_t seed = 2021;
  double train_fraction = 2.0 / 3.0;
  double max_duration = kMaxRecordSeconds;
  std::vector<int> beat_codes = default_beat_codes();
  TrainConfig train;
  BootstrapOptions bootstrap;

  /// Propagates `seed` into the train and bootstrap settings.
  void set_seed(std::uint64_t s);
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every setting, defaults included.
std::string to_config_text(const RunConfig& config);

}  // namespace hbd
