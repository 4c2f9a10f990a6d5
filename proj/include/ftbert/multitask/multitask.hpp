#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "ftbert/experiments/training.hpp"

namespace ftbert {

enum class MixingKind { kProportional, kRoundRobin };

MixingKind parse_mixing(std::string_view name);
std::string to_string(MixingKind kind);

/// Picks the task of each step. Proportional draws task i with probability
/// |D_i| / sum |D_j|; round-robin cycles through the tasks in order.
class TaskSampler {
 public:
  TaskSampler(MixingKind kind, std::vector<std::size_t> sizes, std::uint64_t seed);
  std::size_t next();

 private:
  MixingKind kind_;
  std::vector<std::size_t> sizes_;
  std::size_t total_ = 0;
  std::size_t calls_ = 0;
  Rng rng_;
};

struct TaskData {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> validation;
  std::vector<EncodedExample> test;
};

struct MultitaskResult {
  std::size_t steps = 0;
  /// Steps spent on each task.
  std::vector<std::size_t> task_steps;
  std::vector<MetricsRecord> records;
};

/// Called after each optimizer update with the 1-based step and the task it used.
using MultitaskStepHook = std::function<void(std::size_t step, std::size_t task)>;

/// Joint fine-tuning: every step draws one task, builds a batch from that
/// task's own shuffled stream and updates the shared backbone plus that task's
/// private parameters only. Layer-wise decay and the slanted triangular
/// schedule follow the recipe. Total steps: recipe.train_steps, or
/// epochs * ceil(sum |D_i| / batch). Each task is evaluated on its validation
/// and test data every ceil(sum |D_i| / batch) steps and at the end.
/// Throws ConfigError for fewer than two tasks, a data/task count mismatch or
/// a task without training data.
MultitaskResult multitask_finetune(MultiTaskModel& model, const std::vector<TaskData>& data,
                                   const TrainingRecipe& recipe, MixingKind mixing, MetricsLog* log = nullptr,
                                   const MultitaskStepHook& on_step = {});

/// Continues single-task fine-tuning of `task` from the multi-task weights at
/// `lower_rate` (default: half of recipe.base_lr). Other tasks' parameters are
/// never touched. Throws ConfigError unless lower_rate < recipe.base_lr.
FinetuneResult per_task_refine(MultiTaskModel& model, std::size_t task, const TaskData& data,
                               const TrainingRecipe& recipe, std::optional<double> lower_rate = std::nullopt,
                               MetricsLog* log = nullptr);

}  // namespace ftbert
