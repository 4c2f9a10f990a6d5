#pragma once

#include <cstdint>
#include <optional>

#include <json.hpp>

#include "ftbert/longtext/long_text.hpp"
#include "ftbert/model/layer_selection.hpp"

namespace ftbert {

/// Everything that shapes one fine-tuning run.
struct TrainingRecipe {
  LongTextStrategy long_text = LongTextStrategy::kHeadTail;
  /// Sequence length including [CLS] and [SEP]; truncation budgets and
  /// fraction sizes use max_len - 2.
  std::size_t max_len = 128;
  /// Hierarchical strategies: keep at most this many leading fractions (0 = all).
  std::size_t max_fractions = 0;
  LayerSelection selection = LayerSelection::top();
  double base_lr = 2e-5;
  double decay_factor = 1.0;
  double warmup_proportion = 0.1;
  std::size_t epochs = 4;
  /// Caps the total number of optimizer steps; unset = epochs * ceil(N / batch).
  std::optional<std::size_t> train_steps;
  std::size_t batch_size = 8;
  double dropout = 0.1;
  double clip_norm = 0.0;
  std::uint64_t seed = 0;

  std::size_t capacity() const { return max_len - 2; }
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainingRecipe from_json(const nlohmann::json& j);
};

}  // namespace ftbert
