#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ftbert/model/encoder.hpp"

namespace ftbert {

/// Which hidden layers feed the classifier and how they are merged.
///
/// Layer indices follow LayerOutputs: 0 is the embedding output, l in 1..L is
/// the output of block l. first4 / last4 / all range over block outputs only
/// (first4 = blocks 1..4, last4 = blocks L-3..L, all = blocks 1..L), clamped
/// to the available depth.
struct LayerSelection {
  enum class Strategy { kSingle, kFirst4, kLast4, kAll };
  enum class Combiner { kConcat, kMean, kMax };

  Strategy strategy = Strategy::kSingle;
  Combiner combiner = Combiner::kConcat;
  /// For kSingle; negative counts from the top (-1 = topmost block).
  int layer = -1;

  static LayerSelection single(int layer) { return {Strategy::kSingle, Combiner::kConcat, layer}; }
  static LayerSelection top() { return single(-1); }

  /// Chosen layer indices for an encoder with `num_layers` blocks.
  /// Throws ConfigError for a single layer outside [0, num_layers].
  std::vector<std::size_t> layers(std::size_t num_layers) const;
  std::size_t feature_width(std::size_t num_layers, std::size_t hidden) const;

  /// "top", "layer:<l>", or "<first4|last4|all>_<concat|mean|max>".
  static LayerSelection parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const LayerSelection&) const = default;
};

/// [CLS] (row 0) vector from each selected layer, merged: [1 x feature_width].
template <typename T>
Var<T> select_features(const LayerOutputs<T>& outputs, const LayerSelection& selection);

}  // namespace ftbert
