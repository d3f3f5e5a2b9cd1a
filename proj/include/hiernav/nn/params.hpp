#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiernav/core/errors.hpp"

namespace hiernav::nn {

/// Flat trainable parameters plus the descriptor needed to rebuild the
/// network around them.
struct PolicyParams {
  nlohmann::json arch;
  std::vector<float> values;
  int version = 0;
};

inline std::uint64_t fnv1a(const std::vector<float>& values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float f : values) {
    auto bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

inline std::string checksum_hex(const std::vector<float>& values) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(values)));
  return buf;
}

inline void check_finite(const PolicyParams& p) {
  for (std::size_t i = 0; i < p.values.size(); ++i)
    if (!std::isfinite(p.values[i]))
      throw FormatError("checkpoint parameter " + std::to_string(i) + " is not finite");
}

/// Writes `path` as one JSON header line followed by little-endian float32
/// values. Bumps p.version first.
inline void save_checkpoint(const std::string& path, PolicyParams& p, const nlohmann::json& meta = {}) {
  ++p.version;
  nlohmann::json h;
  h["format"] = "hiernav-checkpoint";
  h["arch"] = p.arch;
  h["version"] = p.version;
  h["count"] = p.values.size();
  h["checksum"] = checksum_hex(p.values);
  if (!meta.is_null()) h["meta"] = meta;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  out << h.dump() << '\n';
  for (float f : p.values) {
    auto bits = std::bit_cast<std::uint32_t>(f);
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
  }
  if (!out) throw FormatError("write failed: " + path);
}

struct LoadedCheckpoint {
  PolicyParams params;
  nlohmann::json meta;
  std::string checksum;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  std::string line;
  std::getline(in, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw FormatError(path + ": checkpoint header is not JSON");
  }
  if (h.value("format", "") != "hiernav-checkpoint") throw FormatError(path + " is not a checkpoint");
  LoadedCheckpoint c;
  c.params.arch = h.at("arch");
  c.params.version = h.at("version").get<int>();
  c.meta = h.value("meta", nlohmann::json{});
  const auto n = h.at("count").get<std::size_t>();
  c.params.values.resize(n);
  for (auto& f : c.params.values) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    f = std::bit_cast<float>(bits);
  }
  if (!in) throw FormatError(path + ": checkpoint payload truncated");
  c.checksum = checksum_hex(c.params.values);
  if (c.checksum != h.at("checksum").get<std::string>())
    throw FormatError(path + ": checksum mismatch (file corrupt)");
  check_finite(c.params);
  return c;
}

}  // namespace hiernav::nn
