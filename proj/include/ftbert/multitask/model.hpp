#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ftbert/core/checkpoint.hpp"
#include "ftbert/experiments/recipe.hpp"
#include "ftbert/model/encoder.hpp"
#include "ftbert/model/heads.hpp"

namespace ftbert {

struct TaskSpec {
  std::string name;
  std::size_t num_classes = 2;
  bool operator==(const TaskSpec&) const = default;
};

/// One encoder shared by every task (embeddings included) plus a private
/// classifier per task, and for hierarchical long-text strategies a private
/// fraction combiner. Task parameters are named "task.<name>.classifier.*" and
/// "task.<name>.combiner.*". A single-task classifier is the one-task case.
class MultiTaskModel {
 public:
  /// Heads are truncated-normal initialised from `rng`, or zero when null.
  MultiTaskModel(EncoderModel<float> encoder, std::vector<TaskSpec> tasks, LongTextStrategy long_text,
                 LayerSelection selection, Rng* rng);
  MultiTaskModel(MultiTaskModel&&) noexcept = default;
  MultiTaskModel& operator=(MultiTaskModel&&) noexcept = default;

  EncoderModel<float>& encoder() { return encoder_; }
  const EncoderModel<float>& encoder() const { return encoder_; }
  LongTextStrategy long_text() const { return long_text_; }
  const LayerSelection& selection() const { return selection_; }
  std::size_t feature_width() const;

  std::size_t num_tasks() const { return tasks_.size(); }
  const TaskSpec& task(std::size_t i) const { return tasks_.at(i); }
  /// Throws ConfigError for an unknown name.
  std::size_t task_index(const std::string& name) const;
  const ClassifierHead<float>& head(std::size_t i) const { return heads_.at(i).head; }

  /// Head (and combiner) parameters of one task.
  std::vector<Parameter<float>*> task_parameters(std::size_t i) const;
  /// Shared backbone followed by the task's own parameters.
  std::vector<Parameter<float>*> trainable_parameters(std::size_t i) const;
  /// Every tensor: the full encoder (MLM/NSP heads included) and all tasks.
  std::vector<Parameter<float>*> all_parameters() const;

  /// [1 x feature_width] document representation. Truncation strategies encode
  /// one sequence and apply the layer selection; hierarchical ones encode each
  /// fraction and merge the top-layer [CLS] vectors with the task's combiner.
  /// Throws ConfigError when the recipe's strategy or selection differs from
  /// the model's.
  Var<float> features(Tape<float>& tape, std::size_t task, std::span<const int> tokens,
                      const TrainingRecipe& recipe, Mode mode, Rng* dropout_rng) const;
  Var<float> logits(Tape<float>& tape, std::size_t task, std::span<const int> tokens, const TrainingRecipe& recipe,
                    Mode mode, Rng* dropout_rng) const;

  /// Metadata adds {"long_text", "layer_selection", "tasks": [{name, num_classes}]}
  /// to the encoder's {"model_config", "vocab_hash", "step"}.
  Checkpoint to_checkpoint(const std::string& vocab_hash, std::size_t step) const;
  static MultiTaskModel from_checkpoint(const Checkpoint& ckpt);

 private:
  struct TaskHead {
    ClassifierHead<float> head;
    std::unique_ptr<FractionCombiner<float>> combiner;
  };

  EncoderModel<float> encoder_;
  std::vector<TaskSpec> tasks_;
  LongTextStrategy long_text_;
  LayerSelection selection_;
  std::unique_ptr<ParameterStore<float>> store_;
  std::vector<TaskHead> heads_;
};

}  // namespace ftbert
