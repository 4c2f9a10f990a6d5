#include "ftbert/model/config.hpp"

#include <string>

#include "ftbert/core/error.hpp"

namespace ftbert {

void EncoderConfig::validate() const {
  if (num_layers < 1) throw ConfigError("encoder needs at least one layer");
  if (hidden < 2) throw ConfigError("hidden size must be >= 2");
  if (heads < 1 || hidden % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(hidden) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (vocab_size <= 5) throw ConfigError("vocab_size must exceed the reserved tokens");
  if (max_positions < 2) throw ConfigError("max_positions must be >= 2");
  if (type_vocab < 1) throw ConfigError("type_vocab must be >= 1");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"num_layers", num_layers}, {"hidden", hidden},
          {"heads", heads},           {"ffn", ffn_size()},
          {"vocab_size", vocab_size}, {"max_positions", max_positions},
          {"type_vocab", type_vocab}, {"dropout", dropout},
          {"init_std", init_std}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.num_layers = j.value("num_layers", c.num_layers);
  c.hidden = j.value("hidden", c.hidden);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", std::size_t{0});
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.type_vocab = j.value("type_vocab", c.type_vocab);
  c.dropout = j.value("dropout", c.dropout);
  c.init_std = j.value("init_std", c.init_std);
  c.validate();
  return c;
}

}  // namespace ftbert
