#include "hbd/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hbd/error.hpp"

namespace hbd {
namespace pt = boost::property_tree;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v)) throw Error(ErrorCode::InvalidConfig, key + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Overwrites `out` only when the key is present; a value that does not
/// convert is an error rather than a silent fallback.
template <typename T>
void read(const pt::ptree& tree, const char* path, T& out) {
  if (tree.get_child_optional(path)) out = tree.get<T>(path);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "run.seed",
      "dataset.train_fraction", "dataset.max_duration", "dataset.beat_codes",
      "network.conv_channels", "network.kernel_sizes", "network.fc_sizes", "network.dropout_p",
      "network.bn_eps", "network.bn_momentum",
      "train.epochs", "train.batch_size", "train.lr", "train.rho", "train.eps", "train.weight_nobeat",
      "train.weight_beat", "train.reduction", "train.reinit_head",
      "evaluate.bootstrap_repetitions", "evaluate.bootstrap_fraction", "evaluate.confidence",
  };
  return keys;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  bootstrap.seed = s;
}

RunConfig default_run_config() {
  RunConfig c;
  c.set_seed(c.seed);
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ptree_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(ErrorCode::InvalidConfig, "key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!known_keys().contains(section + "." + key)) throw Error(ErrorCode::InvalidConfig, "unknown key " + section + "." + key);
    }
  }

  RunConfig c = default_run_config();
  try {
    std::uint64_t seed = c.seed;
    read(tree, "run.seed", seed);
    c.set_seed(seed);
    read(tree, "dataset.train_fraction", c.train_fraction);
    read(tree, "dataset.max_duration", c.max_duration);
    if (auto v = tree.get_optional<std::string>("dataset.beat_codes")) c.beat_codes = parse_list<int>("beat_codes", *v);

    auto& net = c.train.network;
    if (auto v = tree.get_optional<std::string>("network.conv_channels")) {
      const auto ch = parse_list<Index>("conv_channels", *v);
      if (ch.size() != 5) throw Error(ErrorCode::InvalidConfig, "conv_channels needs 5 entries (input + 4 blocks)");
      for (std::size_t i = 0; i < 4; ++i) {
        net.conv_blocks[i].in_channels = ch[i];
        net.conv_blocks[i].out_channels = ch[i + 1];
      }
    }
    if (auto v = tree.get_optional<std::string>("network.kernel_sizes")) {
      const auto k = parse_list<Index>("kernel_sizes", *v);
      if (k.size() != 4) throw Error(ErrorCode::InvalidConfig, "kernel_sizes needs 4 entries");
      for (std::size_t i = 0; i < 4; ++i) net.conv_blocks[i].kernel_size = k[i];
    }
    if (auto v = tree.get_optional<std::string>("network.fc_sizes")) {
      const auto f = parse_list<Index>("fc_sizes", *v);
      if (f.size() != 3) throw Error(ErrorCode::InvalidConfig, "fc_sizes needs 3 entries");
      std::copy(f.begin(), f.end(), net.fc_sizes.begin());
    }
    read(tree, "network.dropout_p", net.dropout_p);
    read(tree, "network.bn_eps", net.bn_eps);
    read(tree, "network.bn_momentum", net.bn_momentum);

    auto& t = c.train;
    read(tree, "train.epochs", t.epochs);
    read(tree, "train.batch_size", t.batch_size);
    read(tree, "train.lr", t.optimizer.lr);
    read(tree, "train.rho", t.optimizer.rho);
    read(tree, "train.eps", t.optimizer.eps);
    read(tree, "train.weight_nobeat", t.weights.no_beat);
    read(tree, "train.weight_beat", t.weights.beat);
    const auto reduction = tree.get<std::string>("train.reduction", "weighted_mean");
    if (reduction == "weighted_mean") t.reduction = Reduction::WeightedMean;
    else if (reduction == "sum") t.reduction = Reduction::Sum;
    else throw Error(ErrorCode::InvalidConfig, "reduction must be weighted_mean or sum");
    read(tree, "train.reinit_head", t.reinit_head);

    read(tree, "evaluate.bootstrap_repetitions", c.bootstrap.repetitions);
    read(tree, "evaluate.bootstrap_fraction", c.bootstrap.fraction);
    read(tree, "evaluate.confidence", c.bootstrap.confidence);
  } catch (const pt::ptree_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  try {
    validate(c.train.network);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (c.train.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (c.beat_codes.empty()) throw Error(ErrorCode::InvalidConfig, "beat_codes must not be empty");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_config_text(const RunConfig& c) {
  const auto& net = c.train.network;
  std::vector<Index> channels{net.conv_blocks[0].in_channels};
  std::vector<Index> kernels;
  for (const auto& b : net.conv_blocks) {
    channels.push_back(b.out_channels);
    kernels.push_back(b.kernel_size);
  }
  std::ostringstream os;
  os << "[run]\n"
     << "seed=" << c.seed << "\n\n"
     << "[dataset]\n"
     << "train_fraction=" << fmt_double(c.train_fraction) << "\n"
     << "max_duration=" << fmt_double(c.max_duration) << "\n"
     << "beat_codes=" << join(c.beat_codes) << "\n\n"
     << "[network]\n"
     << "conv_channels=" << join(channels) << "\n"
     << "kernel_sizes=" << join(kernels) << "\n"
     << "fc_sizes=" << join(std::vector<Index>(net.fc_sizes.begin(), net.fc_sizes.end())) << "\n"
     << "dropout_p=" << fmt_double(net.dropout_p) << "\n"
     << "bn_eps=" << fmt_double(net.bn_eps) << "\n"
     << "bn_momentum=" << fmt_double(net.bn_momentum) << "\n\n"
     << "[train]\n"
     << "epochs=" << c.train.epochs << "\n"
     << "batch_size=" << c.train.batch_size << "\n"
     << "lr=" << fmt_double(c.train.optimizer.lr) << "\n"
     << "rho=" << fmt_double(c.train.optimizer.rho) << "\n"
     << "eps=" << fmt_double(c.train.optimizer.eps) << "\n"
     << "weight_nobeat=" << fmt_double(c.train.weights.no_beat) << "\n"
     << "weight_beat=" << fmt_double(c.train.weights.beat) << "\n"
     << "reduction=" << (c.train.reduction == Reduction::Sum ? "sum" : "weighted_mean") << "\n"
     << "reinit_head=" << (c.train.reinit_head ? "true" : "false") << "\n\n"
     << "[evaluate]\n"
     << "bootstrap_repetitions=" << c.bootstrap.repetitions << "\n"
     << "bootstrap_fraction=" << fmt_double(c.bootstrap.fraction) << "\n"
     << "confidence=" << fmt_double(c.bootstrap.confidence) << "\n";
  return os.str();
}

}  // namespace hbd
