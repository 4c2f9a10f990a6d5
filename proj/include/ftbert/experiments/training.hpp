#pragma once

#include <span>
#include <vector>

#include "ftbert/experiments/dataset.hpp"
#include "ftbert/experiments/metrics.hpp"
#include "ftbert/multitask/model.hpp"

namespace ftbert {

/// Eval-mode loss and error rate of one task over `examples`. Invariant to
/// example order (per-example losses are summed in sorted order).
/// `predictions`, when given, receives the argmax class per example.
MetricsRecord evaluate(const MultiTaskModel& model, std::size_t task, std::span<const EncodedExample> examples,
                       const TrainingRecipe& recipe, std::vector<int>* predictions = nullptr);

struct FinetuneData {
  std::span<const EncodedExample> train;
  /// Drives best-epoch selection; may be empty (the final weights are kept).
  std::span<const EncodedExample> validation;
  /// Evaluated after every epoch for learning curves; may be empty.
  std::span<const EncodedExample> test;
};

struct FinetuneResult {
  std::size_t steps = 0;
  /// 1-based epoch whose weights were kept (0 when nothing ran).
  std::size_t best_epoch = 0;
  double best_validation_error = 0.0;
  std::vector<MetricsRecord> records;
};

/// Number of optimizer steps the recipe runs on `examples` training examples.
std::size_t planned_steps(const TrainingRecipe& recipe, std::size_t examples);

/// Single-task fine-tuning: shuffled mini-batches for up to recipe.epochs
/// epochs (or recipe.train_steps), Adam over the backbone and this task's
/// parameters with layer-wise decayed slanted triangular rates. After each
/// epoch, running train loss/error and validation/test metrics are recorded;
/// the weights of the epoch with the lowest validation error are restored at
/// the end (ties keep the earliest). Throws NumericError as soon as a loss or
/// gradient is non-finite.
FinetuneResult finetune(MultiTaskModel& model, std::size_t task, const FinetuneData& data,
                        const TrainingRecipe& recipe, MetricsLog* log = nullptr);

}  // namespace ftbert
