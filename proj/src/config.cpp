#include "c2f/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "c2f/error.hpp"

namespace c2f {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(std::string_view key, std::string_view v, int line) {
  N out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("line " + std::to_string(line) + ": bad value '" + std::string(v) +
                      "' for key '" + std::string(key) + "'");
  }
  return out;
}

template <typename N>
std::vector<N> parse_list(std::string_view key, std::string_view v, int line) {
  std::vector<N> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(parse_number<N>(key, trim(v.substr(0, comma)), line));
    if (comma == std::string_view::npos) break;
    v = v.substr(comma + 1);
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("line " + std::to_string(line) + ": bad value '" + std::string(v) +
                    "' for key '" + std::string(key) + "' (expected true or false)");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename N>
std::string join(const std::vector<N>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<N>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Config::validate() const {
  network.validate();
  if (image_size < 32 || image_size % 32 != 0) {
    throw ConfigError("image_size must be a positive multiple of 32");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (decay_epoch < 0) throw ConfigError("decay_epoch must be non-negative");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batch normalization)");
  if (scales.empty()) throw ConfigError("scales must not be empty");
  for (double s : scales) {
    if (!(s > 0.0)) throw ConfigError("scales must be positive");
  }
  if (!(loss.weight_lambda >= 0.0)) throw ConfigError("weight_lambda must be non-negative");
  if (loss.weight_kernel < 1 || loss.weight_kernel % 2 == 0) {
    throw ConfigError("weight_kernel must be a positive odd number");
  }
}

std::string Config::canonical_text() const {
  std::ostringstream out;
  out << "seed = " << seed << "\n"
      << "image_size = " << image_size << "\n"
      << "backbone_channels = " << join(network.backbone_channels) << "\n"
      << "rfb_channels = " << network.rfb_channels << "\n"
      << "msca_reduction = " << network.msca_reduction << "\n"
      << "msca_bn = " << (network.msca_bn ? "true" : "false") << "\n"
      << "lr = " << format_double(lr) << "\n"
      << "epochs = " << epochs << "\n"
      << "decay_epoch = " << decay_epoch << "\n"
      << "batch_size = " << batch_size << "\n"
      << "scales = " << join(scales) << "\n"
      << "variant = " << variant_name(network.variant) << "\n"
      << "weight_lambda = " << format_double(loss.weight_lambda) << "\n"
      << "weight_kernel = " << loss.weight_kernel << "\n";
  return out.str();
}

std::uint64_t Config::hash() const { return fnv1a64(canonical_text()); }

Config parse_config(std::string_view text) {
  Config cfg;
  cfg.source = std::string(text);
  std::set<std::string> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view v = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, v, line_no);
    } else if (key == "image_size") {
      cfg.image_size = parse_number<int>(key, v, line_no);
    } else if (key == "backbone_channels") {
      cfg.network.backbone_channels = parse_list<int>(key, v, line_no);
    } else if (key == "rfb_channels") {
      cfg.network.rfb_channels = parse_number<int>(key, v, line_no);
    } else if (key == "msca_reduction") {
      cfg.network.msca_reduction = parse_number<int>(key, v, line_no);
    } else if (key == "msca_bn") {
      cfg.network.msca_bn = parse_bool(key, v, line_no);
    } else if (key == "lr") {
      cfg.lr = parse_number<double>(key, v, line_no);
    } else if (key == "epochs") {
      cfg.epochs = parse_number<int>(key, v, line_no);
    } else if (key == "decay_epoch") {
      cfg.decay_epoch = parse_number<int>(key, v, line_no);
    } else if (key == "batch_size") {
      cfg.batch_size = parse_number<int>(key, v, line_no);
    } else if (key == "scales") {
      cfg.scales = parse_list<double>(key, v, line_no);
    } else if (key == "variant") {
      cfg.network.variant = parse_variant(v);
    } else if (key == "weight_lambda") {
      cfg.loss.weight_lambda = parse_number<double>(key, v, line_no);
    } else if (key == "weight_kernel") {
      cfg.loss.weight_kernel = parse_number<int>(key, v, line_no);
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace c2f
