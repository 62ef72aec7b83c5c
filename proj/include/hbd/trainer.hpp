#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hbd/adadelta.hpp"
#include "hbd/dataset.hpp"
#include "hbd/loss.hpp"
#include "hbd/network.hpp"

namespace hbd {

using Params = NetworkParams<float>;

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  ClassWeights weights;
  Reduction reduction = Reduction::WeightedMean;
  AdaDeltaConfig optimizer;  // lr = 0.01
  std::uint64_t seed = 0;
  bool freeze_conv = false;
  /// Transfer only: re-initialize the FC head instead of fine-tuning it.
  bool reinit_head = false;
  NetworkConfig network;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_mcc = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

struct TrainResult {
  Params params;
  TrainHistory history;
};

/// Mini-batch training. Each epoch reshuffles the segment order with the
/// seeded generator and visits every segment once (the final short batch
/// included). With freeze_conv the conv part runs on its running statistics
/// and none of its parameters or statistics change. Train MCC is measured on
/// the train-mode predictions made during the epoch. A non-finite batch loss
/// throws NonFiniteLoss.
TrainResult train(const LabeledDataset& dataset, const TrainConfig& config, const std::optional<Params>& init = std::nullopt);

/// Loads `base_checkpoint`, then trains only the FC part starting from the
/// loaded weights.
TrainResult transfer(const std::filesystem::path& base_checkpoint, const LabeledDataset& dataset, TrainConfig config);
TrainResult transfer(const Params& base, const NetworkConfig& base_config, const LabeledDataset& dataset, TrainConfig config);

/// Eval-mode predictions, argmax over the two logits (ties -> NO_BEAT).
std::vector<Label> predict_labels(const NetworkConfig& config, const Params& params, const LabeledDataset& dataset,
                                  std::size_t batch_size = 256);

std::vector<Label> true_labels(const LabeledDataset& dataset);

/// Consecutive batches over `order`; the last one may be short.
std::vector<std::span<const std::size_t>> epoch_batches(std::span<const std::size_t> order, std::size_t batch_size);

/// (batch, 1, 250) tensor from the segments at `indices`.
Tensor3<float> make_batch(const LabeledDataset& dataset, std::span<const std::size_t> indices);

/// epoch,mean_loss,train_mcc,seconds
std::string history_csv(const TrainHistory& history);

// Checkpoint: "HBDL", u32 version, u32 length + UTF-8 JSON architecture
// header, float32 blocks in declared order, FNV-1a 64 checksum.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Params& params, const NetworkConfig& config);
std::pair<Params, NetworkConfig> deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Params& params, const NetworkConfig& config, const std::filesystem::path& path);
std::pair<Params, NetworkConfig> load_checkpoint(const std::filesystem::path& path);

std::string network_config_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(std::string_view text);

}  // namespace hbd
