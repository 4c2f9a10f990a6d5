#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ftbert/experiments/config.hpp"
#include "ftbert/experiments/training.hpp"
#include "ftbert/text/vocab.hpp"

namespace ftbert {

/// Train/validation/test splits of one dataset, as text and as word pieces.
struct PreparedData {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::vector<EncodedExample> train_ids;
  std::vector<EncodedExample> validation_ids;
  std::vector<EncodedExample> test_ids;
};

/// Loads `spec`, carves the stratified validation split off the training file
/// and, when `few_shot_fraction` < 1, subsamples what remains.
PreparedData prepare_data(const DataSpec& spec, const WordPieceTokenizer& tokenizer, double validation_fraction,
                          double few_shot_fraction, std::uint64_t seed);

/// Fresh model for `tasks`: the encoder comes from `init` when given (its
/// vocabulary hash must match `vocab`), otherwise it is randomly initialised
/// from `seed` with vocab_size set to the vocabulary's size.
MultiTaskModel initial_model(const ExperimentConfig& config, const Vocabulary& vocab,
                             const std::vector<TaskSpec>& tasks, const TrainingRecipe& recipe,
                             const Checkpoint* init);

/// Builds the vocabulary from the training texts of `data` (and pre-training
/// sources) and writes it to config.vocab.
Vocabulary run_build_vocab(const ExperimentConfig& config);

/// Assembles and saves the corpus (output_dir/corpus.txt), runs further
/// pre-training and writes output_dir/pretrain_step_<n>.ckpt at each
/// checkpoint step, output_dir/pretrained.ckpt at the end and
/// output_dir/pretrain_metrics.jsonl.
PretrainResult run_pretrain(const ExperimentConfig& config);

struct RunSummary {
  bool diverged = false;
  std::size_t best_epoch = 0;
  double validation_error = 0.0;
  double test_error = 0.0;
  std::vector<MetricsRecord> records;
};

/// Fine-tunes on `data` with `recipe`. Writes output_dir/metrics.jsonl and
/// output_dir/model.ckpt when `write_outputs` is set. The last metrics record
/// ("best_test") evaluates the restored best-epoch weights on the test split.
/// A non-finite loss is reported as diverged instead of thrown.
RunSummary run_finetune(const ExperimentConfig& config, const TrainingRecipe& recipe, bool write_outputs = true);
RunSummary run_finetune(const ExperimentConfig& config);

struct MultitaskSummary {
  /// Test error per task after joint training and, when enabled, after refinement.
  std::vector<double> multitask_test_error;
  std::vector<double> refined_test_error;
};

/// Joint fine-tuning over config.multitask.tasks; writes
/// output_dir/multitask.ckpt, output_dir/refined_<task>.ckpt and
/// output_dir/multitask_metrics.jsonl.
MultitaskSummary run_multitask(const ExperimentConfig& config);

/// Evaluates a task of a saved model on config.data's test split (or, when
/// `dataset` is given, on that file in config.data's format).
MetricsRecord run_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                       const std::string& task = "", const std::optional<std::filesystem::path>& dataset = {});

struct GridCell {
  double base_lr = 0.0;
  double decay_factor = 1.0;
  RunSummary summary;
};

struct GridReport {
  std::vector<GridCell> cells;
  std::vector<GridCell> sweep;
};

/// One seeded run per (lr, decay) cell written to output_dir/grid.tsv, plus the
/// learning-rate sweep (decay from the recipe) written to
/// output_dir/sweep.jsonl with per-epoch train and test curves. Diverged runs
/// are recorded, not thrown. Cells run on config.grid.workers threads; the
/// report order is fixed by the lists.
GridReport run_grid(const ExperimentConfig& config);

std::string format_grid_tsv(const std::vector<GridCell>& cells);
std::string format_sweep_jsonl(const std::vector<GridCell>& sweep);

/// Stratified subsample of config.data's training file written to `out`.
Dataset run_subsample(const ExperimentConfig& config, double proportion, const std::filesystem::path& out);

}  // namespace ftbert
