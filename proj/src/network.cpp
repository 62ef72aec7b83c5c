#include "hbd/network.hpp"

namespace hbd {

void validate(const NetworkConfig& config) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  for (std::size_t i = 0; i < config.conv_blocks.size(); ++i) {
    const auto& b = config.conv_blocks[i];
    const auto tag = "conv block " + std::to_string(i) + ": ";
    if (b.in_channels < 1 || b.out_channels < 1) fail(tag + "channel counts must be >= 1");
    if (b.kernel_size < 1 || b.kernel_size % 2 == 0) fail(tag + "kernel size must be odd and >= 1");
    if (i > 0 && b.in_channels != config.conv_blocks[i - 1].out_channels) fail(tag + "in_channels does not chain");
  }
  for (auto w : config.fc_sizes) {
    if (w < 1) fail("fc widths must be >= 1");
  }
  if (config.fc_sizes.back() != 2) fail("final fc width must be 2 (BEAT / NO-BEAT)");
  if (!(config.dropout_p >= 0.0 && config.dropout_p < 1.0)) fail("dropout_p must lie in [0, 1)");
  if (config.pool_kernel != 2) fail("pool kernel is fixed at 2");
  if (config.trunk_length() < 1) fail("input too short for four pooling stages");
  if (!(config.bn_eps > 0.0)) fail("bn_eps must be positive");
  if (!(config.bn_momentum >= 0.0 && config.bn_momentum <= 1.0)) fail("bn_momentum must lie in [0, 1]");
}

}  // namespace hbd
