#pragma once

#include <cstddef>

#include <json.hpp>

namespace ftbert {

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 2;
  /// 0 means 4 * hidden.
  std::size_t ffn = 0;
  std::size_t vocab_size = 8000;
  std::size_t max_positions = 128;
  std::size_t type_vocab = 2;
  double dropout = 0.1;
  double init_std = 0.02;

  std::size_t ffn_size() const { return ffn ? ffn : 4 * hidden; }

  /// Throws ConfigError: hidden % heads != 0, num_layers == 0, dropout outside [0, 1), ...
  void validate() const;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);

  bool operator==(const EncoderConfig&) const = default;
};

}  // namespace ftbert
