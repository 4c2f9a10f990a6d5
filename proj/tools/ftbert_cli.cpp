// Command-line runner: every subcommand reads one JSON experiment config.
// Exit codes: 0 success, 1 runtime failure, 2 invalid config or missing input.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftbert/core/error.hpp"
#include "ftbert/core/log.hpp"
#include "ftbert/experiments/runner.hpp"

namespace {

using ftbert::ExperimentConfig;

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed, bool strict) {
  std::ifstream in(path);
  if (!in) throw ftbert::ConfigError("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ftbert::ConfigError("config '" + path + "': " + e.what());
  }
  if (seed) {
    j["seed"] = *seed;
    // An explicit --seed also reseeds sections that carry their own seed.
    if (j.contains("recipe") && j["recipe"].is_object()) j["recipe"].erase("seed");
    if (j.contains("pretrain") && j["pretrain"].is_object()) j["pretrain"].erase("seed");
  }
  if (strict) j["strict_deterministic"] = true;
  return ExperimentConfig::from_json(j, std::filesystem::path(path).parent_path());
}

void print_summary(const ftbert::RunSummary& s) {
  if (s.diverged) {
    std::cout << "diverged\n";
    return;
  }
  std::cout << "best_epoch " << s.best_epoch << "\nvalidation_error " << s.validation_error << "\ntest_error "
            << s.test_error << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine-tuning and further pre-training of small BERT-style text classifiers"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  bool quiet = false;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");
  app.add_flag("--strict-deterministic", strict, "Zero wall-clock fields so reruns are byte-identical");
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  auto* build_vocab = app.add_subcommand("build-vocab", "Build the WordPiece vocabulary from the configured datasets");
  auto* pretrain = app.add_subcommand("pretrain", "Further pre-train the encoder on the configured corpus");
  auto* finetune = app.add_subcommand("finetune", "Fine-tune on the configured dataset");
  auto* multitask = app.add_subcommand("multitask", "Joint multi-task fine-tuning, then per-task refinement");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint;
  std::string task;
  std::optional<std::string> eval_data;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);
  eval->add_option("--task", task, "Task head name (default: first task)");
  eval->add_option("--dataset", eval_data, "Labeled CSV (default: the config's test file)")->check(CLI::ExistingFile);

  auto* grid = app.add_subcommand("grid", "Learning-rate x decay-factor grid and learning-rate sweep");

  auto* subsample = app.add_subcommand("subsample", "Write a stratified subset of the training data");
  double proportion = 1.0;
  std::string out;
  subsample->add_option("--proportion", proportion, "Share of the training set to keep")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  subsample->add_option("--out", out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (quiet) ftbert::set_log_level(ftbert::LogLevel::kWarning);

  try {
    const auto config = load_config(config_path, seed, strict);
    const std::string command = app.get_subcommands().front()->get_name();
    if (command != "subsample") config.check_inputs(command);

    if (*build_vocab) {
      const auto vocab = ftbert::run_build_vocab(config);
      std::cout << "vocab_size " << vocab.size() << '\n';
    } else if (*pretrain) {
      const auto result = ftbert::run_pretrain(config);
      if (!result.losses.empty()) std::cout << "final_loss " << result.losses.back().total() << '\n';
    } else if (*finetune) {
      print_summary(ftbert::run_finetune(config));
    } else if (*multitask) {
      const auto s = ftbert::run_multitask(config);
      for (std::size_t t = 0; t < config.multitask->tasks.size(); ++t) {
        std::cout << config.multitask->tasks[t].name << " multitask_test_error " << s.multitask_test_error[t];
        if (t < s.refined_test_error.size()) std::cout << " refined_test_error " << s.refined_test_error[t];
        std::cout << '\n';
      }
    } else if (*eval) {
      std::optional<std::filesystem::path> ds;
      if (eval_data) ds = *eval_data;
      std::cout << ftbert::run_eval(config, checkpoint, task, ds).to_json().dump() << '\n';
    } else if (*grid) {
      const auto report = ftbert::run_grid(config);
      std::cout << ftbert::format_grid_tsv(report.cells);
    } else if (*subsample) {
      const auto sub = ftbert::run_subsample(config, proportion, out);
      std::cout << "examples " << sub.size() << '\n';
    }
  } catch (const ftbert::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ftbert::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
