#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ftbert/core/tensor.hpp"

namespace ftbert {

/// Checkpoint container.
///
///   offset 0   8 bytes   magic "FTBCKPT1"
///   offset 8   8 bytes   header length N, unsigned little-endian
///   offset 16  N bytes   UTF-8 JSON header:
///                          {"metadata": {...},
///                           "tensors": [{"name", "shape", "offset", "count"}, ...]}
///                        offsets are in bytes from the start of the data section
///   offset 16+N          data section: every tensor as little-endian IEEE-754
///                        binary32, in header order, no padding
///
/// The JSON header is written with sorted keys and no whitespace, so
/// parse followed by serialize reproduces the input byte for byte.
struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

class Checkpoint {
 public:
  static constexpr std::string_view kMagic = "FTBCKPT1";

  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  void add(std::string name, Tensor<float> tensor);
  const Tensor<float>* find(std::string_view name) const;

  std::string serialize() const;
  static Checkpoint parse(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// FNV-1a 64-bit, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace ftbert
