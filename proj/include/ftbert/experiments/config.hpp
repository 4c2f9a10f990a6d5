#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ftbert/experiments/dataset.hpp"
#include "ftbert/experiments/recipe.hpp"
#include "ftbert/model/config.hpp"
#include "ftbert/multitask/multitask.hpp"
#include "ftbert/pretrain/corpus.hpp"
#include "ftbert/pretrain/trainer.hpp"

namespace ftbert {

/// A labeled CSV dataset with an optional held-out test file.
struct DataSpec {
  std::string name;
  std::filesystem::path train;
  std::filesystem::path test;
  DatasetFormat format = DatasetFormat::kLabelText;
  std::size_t num_classes = 2;
};

struct PretrainSpec {
  PretrainScope scope;
  /// Datasets of the scope other than the main `data` entry.
  std::vector<DataSpec> sources;
  std::vector<std::pair<std::string, std::string>> dedup_pairs;
  Language language = Language::kEnglish;
  PretrainConfig train;
};

struct MultitaskSpec {
  std::vector<DataSpec> tasks;
  MixingKind mixing = MixingKind::kProportional;
  bool refine = true;
  std::optional<double> refine_lr;
};

struct GridSpec {
  std::vector<double> learning_rates{2.5e-5, 2.0e-5};
  std::vector<double> decay_factors{1.00, 0.95, 0.90, 0.85};
  std::vector<double> sweep_learning_rates{2e-5, 5e-5, 1e-4, 4e-4};
  std::size_t workers = 1;
};

/// One experiment, loaded from a single JSON document. Relative paths are
/// resolved against the config file's directory.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  bool strict_deterministic = false;
  std::filesystem::path output_dir = "runs";
  EncoderConfig model;
  std::filesystem::path vocab;
  /// Target size for build-vocab (defaults to model.vocab_size).
  std::size_t vocab_size = 0;
  std::optional<std::filesystem::path> init_checkpoint;
  DataSpec data;
  double validation_fraction = 0.1;
  double few_shot_fraction = 1.0;
  TrainingRecipe recipe;
  std::optional<PretrainSpec> pretrain;
  std::optional<MultitaskSpec> multitask;
  GridSpec grid;

  /// Throws ConfigError on missing mandatory keys ("seed", "output_dir",
  /// "vocab", "data"), unknown keys or invalid values. The recipe and the
  /// pre-training loop inherit `seed` unless they set their own.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Throws ConfigError when an input file referenced by `command` is missing.
  void check_inputs(const std::string& command) const;
};

}  // namespace ftbert
