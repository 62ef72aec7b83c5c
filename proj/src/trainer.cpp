#include "hbd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include <json.hpp>

#include "hbd/binary_io.hpp"
#include "hbd/metrics.hpp"

namespace hbd {

Tensor3<float> make_batch(const LabeledDataset& dataset, std::span<const std::size_t> indices) {
  Tensor3<float> batch(static_cast<Index>(indices.size()), 1, static_cast<Index>(kSegmentLength));
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = dataset.segments[indices[b]].samples;
    std::copy(s.begin(), s.end(), batch.data.data() + static_cast<Index>(b * kSegmentLength));
  }
  return batch;
}

std::vector<Label> true_labels(const LabeledDataset& dataset) {
  std::vector<Label> labels;
  labels.reserve(dataset.segments.size());
  for (const auto& s : dataset.segments) labels.push_back(s.label);
  return labels;
}

std::vector<std::span<const std::size_t>> epoch_batches(std::span<const std::size_t> order, std::size_t batch_size) {
  std::vector<std::span<const std::size_t>> out;
  for (std::size_t first = 0; first < order.size(); first += batch_size) {
    out.push_back(order.subspan(first, std::min(batch_size, order.size() - first)));
  }
  return out;
}

namespace {

Label argmax_label(const MatrixX<float>& logits, Index row) {
  return logits(row, 1) > logits(row, 0) ? Label::Beat : Label::NoBeat;
}

}  // namespace

TrainResult train(const LabeledDataset& dataset, const TrainConfig& config, const std::optional<Params>& init) {
  validate(config.network);
  if (dataset.segments.empty()) throw Error(ErrorCode::EmptyDataset, dataset.subset_name + " " + std::string(to_string(dataset.partition)));
  if (config.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (init && !shapes_match(config.network, *init)) {
    throw Error(ErrorCode::ShapeMismatch, "initial parameters do not match the network configuration");
  }

  TrainResult result;
  result.params = init ? *init : init_params<float>(config.network, config.seed);
  auto state = make_adadelta_state(result.params);
  // init_params draws from Xoshiro256(seed); shuffling and dropout use substream 1.
  auto rng = Xoshiro256::substream(config.seed, 1);

  const std::size_t n = dataset.segments.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  ForwardCache<float> cache;
  const ForwardOptions options{Mode::Train, config.freeze_conv};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::vector<Label> predicted(n), truth(n);

    std::size_t done = 0;
    for (const auto idx : epoch_batches(order, config.batch_size)) {
      const std::size_t count = idx.size();
      const auto batch = make_batch(dataset, idx);
      std::vector<Label> labels(count);
      for (std::size_t b = 0; b < count; ++b) labels[b] = dataset.segments[idx[b]].label;

      const auto logits = forward(config.network, result.params, batch, options, rng, cache);
      const auto loss = weighted_cross_entropy(logits, labels, config.weights, config.reduction);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch starting at " + std::to_string(done));
      }
      const auto grads = backward(config.network, result.params, cache, loss.dlogits, config.freeze_conv);
      adadelta_step(result.params, grads, state, config.optimizer, config.freeze_conv);
      update_running_stats(config.network, result.params, cache);

      loss_sum += loss.loss * static_cast<double>(count);
      for (std::size_t b = 0; b < count; ++b) {
        predicted[done + b] = argmax_label(logits, static_cast<Index>(b));
        truth[done + b] = labels[b];
      }
      done += count;
    }
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back({epoch, loss_sum / static_cast<double>(n), mcc(confusion(predicted, truth)), elapsed});
  }
  return result;
}

TrainResult transfer(const Params& base, const NetworkConfig& base_config, const LabeledDataset& dataset, TrainConfig config) {
  if (!(base_config == config.network) || !shapes_match(config.network, base)) {
    throw Error(ErrorCode::IncompatibleCheckpoint, "checkpoint architecture differs from the requested network");
  }
  config.freeze_conv = true;
  Params init = base;
  if (config.reinit_head) {
    const auto fresh = init_params<float>(config.network, config.seed);
    init.fc = fresh.fc;
  }
  return train(dataset, config, init);
}

TrainResult transfer(const std::filesystem::path& base_checkpoint, const LabeledDataset& dataset, TrainConfig config) {
  const auto [params, net] = load_checkpoint(base_checkpoint);
  return transfer(params, net, dataset, std::move(config));
}

std::vector<Label> predict_labels(const NetworkConfig& config, const Params& params, const LabeledDataset& dataset,
                                  std::size_t batch_size) {
  std::vector<Label> out;
  out.reserve(dataset.segments.size());
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < dataset.segments.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, dataset.segments.size() - first);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), first);
    const auto logits = predict_logits(config, params, make_batch(dataset, idx));
    for (Index b = 0; b < logits.rows(); ++b) out.push_back(argmax_label(logits, b));
  }
  return out;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,mean_loss,train_mcc,seconds\n";
  char buf[128];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.8f,%.6f,%.3f\n", e.epoch, e.mean_loss, e.train_mcc, e.seconds);
    out += buf;
  }
  return out;
}

// ------------------------------------------------------------ checkpoint

std::string network_config_json(const NetworkConfig& c) {
  nlohmann::ordered_json j;
  j["conv_blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : c.conv_blocks) {
    j["conv_blocks"].push_back({{"in_channels", b.in_channels}, {"out_channels", b.out_channels}, {"kernel_size", b.kernel_size}});
  }
  j["fc_sizes"] = c.fc_sizes;
  j["dropout_p"] = c.dropout_p;
  j["pool_kernel"] = c.pool_kernel;
  j["input_length"] = c.input_length;
  j["bn_eps"] = c.bn_eps;
  j["bn_momentum"] = c.bn_momentum;
  return j.dump();
}

NetworkConfig network_config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NetworkConfig c;
    const auto& blocks = j.at("conv_blocks");
    if (blocks.size() != 4) throw Error(ErrorCode::CorruptCheckpoint, "expected 4 conv blocks");
    for (std::size_t i = 0; i < 4; ++i) {
      c.conv_blocks[i] = {blocks[i].at("in_channels").get<Index>(), blocks[i].at("out_channels").get<Index>(),
                          blocks[i].at("kernel_size").get<Index>()};
    }
    const auto fc = j.at("fc_sizes").get<std::vector<Index>>();
    if (fc.size() != 3) throw Error(ErrorCode::CorruptCheckpoint, "expected 3 fc sizes");
    std::copy(fc.begin(), fc.end(), c.fc_sizes.begin());
    c.dropout_p = j.at("dropout_p").get<double>();
    c.pool_kernel = j.at("pool_kernel").get<Index>();
    c.input_length = j.at("input_length").get<Index>();
    c.bn_eps = j.at("bn_eps").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("architecture header: ") + e.what());
  }
}

std::vector<std::uint8_t> serialize_checkpoint(const Params& params, const NetworkConfig& config) {
  if (!shapes_match(config, params)) throw Error(ErrorCode::ShapeMismatch, "parameters do not match the configuration");
  ByteWriter w;
  w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("HBDL"), 4));
  w.put(kCheckpointVersion);
  w.put_string(network_config_json(config));
  for_each_block(params, [&](const std::string&, const auto& m, Part, BlockKind) {
    w.put(static_cast<std::uint64_t>(m.size()));
    w.put_array(std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
  });
  w.seal();
  return w.bytes();
}

std::pair<Params, NetworkConfig> deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "HBDL", 4) != 0) throw Error(ErrorCode::CorruptCheckpoint, "bad magic");
  ByteReader r(bytes);
  r.get<std::uint32_t>();
  if (const auto version = r.get<std::uint32_t>(); version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
  }
  if (!checksum_matches(bytes)) throw Error(ErrorCode::CorruptCheckpoint, "checksum mismatch");
  ByteReader body(bytes.first(bytes.size() - 8));
  body.get<std::uint32_t>();
  body.get<std::uint32_t>();
  const auto header = body.get_string();
  if (!body.ok()) throw Error(ErrorCode::CorruptCheckpoint, "truncated architecture header");
  const auto config = network_config_from_json(header);
  try {
    validate(config);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, e.what());
  }

  auto params = zero_params<float>(config);
  for_each_block(params, [&](const std::string& name, auto& m, Part, BlockKind) {
    const auto count = body.get<std::uint64_t>();
    if (!body.ok() || count != static_cast<std::uint64_t>(m.size())) {
      throw Error(ErrorCode::CorruptCheckpoint, "block " + name + " has the wrong size");
    }
    body.get_array(std::span<float>(m.data(), static_cast<std::size_t>(m.size())));
  });
  if (!body.ok() || body.remaining() != 0) throw Error(ErrorCode::CorruptCheckpoint, "length mismatch");
  return {std::move(params), config};
}

void save_checkpoint(const Params& params, const NetworkConfig& config, const std::filesystem::path& path) {
  write_file_bytes(path.string(), serialize_checkpoint(params, config));
}

std::pair<Params, NetworkConfig> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingCheckpoint, path.string());
  return deserialize_checkpoint(read_file_bytes(path.string()));
}

}  // namespace hbd
