#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/losses.hpp"
#include "c2f/network.hpp"

namespace c2f {

/// Run configuration read from `key = value` text. Every key has a default.
struct Config {
  std::uint64_t seed = 1;
  int image_size = 352;
  NetworkConfig network;
  double lr = 1e-4;
  int epochs = 40;
  int decay_epoch = 30;
  int batch_size = 4;
  std::vector<double> scales{0.75, 1.0, 1.25};
  LossOptions loss;

  /// Throws ConfigError on inconsistent values.
  void validate() const;

  /// One `key = value` line per key in a fixed order.
  std::string canonical_text() const;

  /// FNV-1a 64 of canonical_text().
  std::uint64_t hash() const;

  /// Original text the config was parsed from (empty for defaults).
  std::string source;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys, repeated
/// keys and malformed values raise ConfigError naming the key and line.
Config parse_config(std::string_view text);
Config load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace c2f
