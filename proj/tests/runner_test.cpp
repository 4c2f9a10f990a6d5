#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ftbert/core/error.hpp"
#include "ftbert/core/log.hpp"
#include "ftbert/experiments/runner.hpp"
#include "support/workspace.hpp"

using namespace ftbert;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ftbert_runner_test_" + name);
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

struct QuietLog {
  QuietLog() { set_log_level(LogLevel::kError); }
  ~QuietLog() { set_log_level(LogLevel::kInfo); }
};

}  // namespace

TEST_CASE("config rejects missing mandatory and unknown keys") {
  const auto dir = scratch("keys");
  const auto doc = toy::scratch_experiment(dir, 1, 20, 10);
  CHECK_NOTHROW(ExperimentConfig::from_json(doc));
  for (const char* key : {"seed", "output_dir", "vocab", "data"}) {
    auto j = doc;
    j.erase(key);
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  auto j = doc;
  j["learning_rate"] = 1e-3;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  j = doc;
  j["recipe"]["lr"] = 1e-3;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  j = doc;
  j["grid"] = {{"workers", 2}, {"sizes", 3}};
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  j = doc;
  j["validation_fraction"] = 1.0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
}

TEST_CASE("config resolves relative paths and inherits the seed") {
  const auto dir = scratch("paths");
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "exp.json");
    out << json{{"seed", 77}, {"output_dir", "out"}, {"vocab", "v.txt"}, {"data", {{"dataset_path", "d.csv"}}}}.dump();
  }
  const auto c = ExperimentConfig::load(dir / "exp.json");
  CHECK(c.output_dir == dir / "out");
  CHECK(c.vocab == dir / "v.txt");
  CHECK(c.data.train == dir / "d.csv");
  CHECK(c.recipe.seed == 77);
  CHECK_THROWS_AS(c.check_inputs("finetune"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "absent.json"), ConfigError);

  const auto again = ExperimentConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
}

TEST_CASE("vocab, fine-tune and eval agree on the test error") {
  QuietLog quiet;
  const auto dir = scratch("finetune");
  auto doc = toy::scratch_experiment(dir, 3, 200, 100);
  doc["strict_deterministic"] = true;
  const auto config = ExperimentConfig::from_json(doc);
  const auto vocab = run_build_vocab(config);
  CHECK(vocab.size() <= 60);
  CHECK(vocab.id("alpha") != vocab.id("omega"));
  CHECK_NOTHROW(config.check_inputs("finetune"));

  const auto summary = run_finetune(config);
  REQUIRE_FALSE(summary.diverged);
  CHECK(summary.best_epoch >= 1);
  CHECK(summary.best_epoch <= 2);
  const auto records = read_metrics(config.output_dir / "metrics.jsonl");
  REQUIRE_FALSE(records.empty());
  CHECK(records.back().split == "best_test");
  CHECK(records.back().error_rate == summary.test_error);
  for (const auto& r : records) CHECK(r.wall_clock == 0.0);

  const auto eval = run_eval(config, config.output_dir / "model.ckpt", "markers", std::nullopt);
  CHECK(eval.error_rate == doctest::Approx(summary.test_error).epsilon(1e-12));
  CHECK_THROWS_AS(run_eval(config, config.output_dir / "model.ckpt", "nope", std::nullopt), Error);
}

TEST_CASE("init checkpoint from another vocabulary is rejected") {
  QuietLog quiet;
  const auto dir = scratch("mismatch");
  auto doc = toy::scratch_experiment(dir, 4, 60, 20);
  doc["recipe"]["epochs"] = 1;
  auto config = ExperimentConfig::from_json(doc);
  run_build_vocab(config);
  run_finetune(config);
  std::ofstream(config.vocab, std::ios::app) << "zzzextra\n";
  config.init_checkpoint = config.output_dir / "model.ckpt";
  CHECK_THROWS_AS(run_finetune(config), ConfigError);
}

TEST_CASE("grid and sweep artifacts record divergence") {
  QuietLog quiet;
  const auto dir = scratch("grid");
  auto doc = toy::scratch_experiment(dir, 5, 80, 40);
  doc["recipe"]["epochs"] = 1;
  doc["grid"] = {{"learning_rates", {1e-3, 1e30}},
                 {"decay_factors", {1.0, 0.9}},
                 {"sweep_learning_rates", {1e-3, 1e30}},
                 {"workers", 2}};
  const auto config = ExperimentConfig::from_json(doc);
  run_build_vocab(config);
  const auto report = run_grid(config);
  REQUIRE(report.cells.size() == 4);
  CHECK_FALSE(report.cells[0].summary.diverged);
  CHECK_FALSE(report.cells[1].summary.diverged);
  CHECK(report.cells[2].summary.diverged);
  CHECK(report.cells[3].summary.diverged);

  const auto tsv = toy::read_file(config.output_dir / "grid.tsv");
  CHECK(count_lines(tsv) == 5);
  CHECK(tsv.find("1e+30\t0.9\tdiverged") != std::string::npos);
  const auto sweep = toy::read_file(config.output_dir / "sweep.jsonl");
  std::istringstream lines(sweep);
  std::string line;
  std::size_t ok = 0, diverged = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    if (j["status"] == "diverged") {
      ++diverged;
      CHECK(j["base_lr"].get<double>() == 1e30);
    } else {
      ++ok;
      CHECK(j.contains("train_error"));
      CHECK(j.contains("test_loss"));
    }
  }
  CHECK(ok == 1);
  CHECK(diverged == 1);

  auto serial = doc;
  serial["grid"]["workers"] = 1;
  serial["output_dir"] = (dir / "serial").string();
  const auto serial_config = ExperimentConfig::from_json(serial);
  run_grid(serial_config);
  CHECK(toy::read_file(serial_config.output_dir / "grid.tsv") == tsv);
  CHECK(toy::read_file(serial_config.output_dir / "sweep.jsonl") == sweep);
}

TEST_CASE("grid tsv layout") {
  GridCell a{2e-5, 0.95, {}};
  a.summary.best_epoch = 3;
  a.summary.validation_error = 4.5;
  a.summary.test_error = 5.25;
  GridCell b{4e-4, 1.0, {}};
  b.summary.diverged = true;
  CHECK(format_grid_tsv({a, b}) ==
        "base_lr\tdecay_factor\tstatus\tbest_epoch\tvalidation_error\ttest_error\n"
        "2e-05\t0.95\tok\t3\t4.5\t5.25\n"
        "0.0004\t1\tdiverged\tdiverged\tdiverged\tdiverged\n");
}

TEST_CASE("pretrain writes checkpoints that seed fine-tuning") {
  QuietLog quiet;
  const auto dir = scratch("pretrain");
  auto doc = toy::scratch_experiment(dir, 6, 60, 20);
  doc["recipe"]["epochs"] = 1;
  doc["pretrain"] = {{"steps", 6}, {"checkpoint_every", 3}, {"batch_size", 4}, {"max_len", 32}, {"learning_rate", 1e-3}};
  auto config = ExperimentConfig::from_json(doc);
  run_build_vocab(config);
  const auto result = run_pretrain(config);
  CHECK(result.losses.size() == 6);
  for (const char* f : {"corpus.txt", "pretrain_step_3.ckpt", "pretrain_step_6.ckpt", "pretrained.ckpt"}) {
    CHECK(std::filesystem::exists(config.output_dir / f));
  }
  CHECK(read_metrics(config.output_dir / "pretrain_metrics.jsonl").size() == 2);
  config.init_checkpoint = config.output_dir / "pretrained.ckpt";
  CHECK_FALSE(run_finetune(config).diverged);
}

TEST_CASE("multitask run writes joint and refined checkpoints") {
  QuietLog quiet;
  const auto dir = scratch("multitask");
  auto doc = toy::scratch_experiment(dir, 7, 60, 20);
  save_dataset(toy::marker_order_text("second", 40, 99), dir / "second.csv");
  doc["recipe"]["epochs"] = 1;
  doc["multitask"] = {{"tasks",
                       {{{"name", "markers"}, {"train", (dir / "train.csv").string()}, {"test", (dir / "test.csv").string()}},
                        {{"name", "second"}, {"train", (dir / "second.csv").string()}, {"test", (dir / "test.csv").string()}}}},
                      {"mixing", "round-robin"}};
  const auto config = ExperimentConfig::from_json(doc);
  run_build_vocab(config);
  CHECK_NOTHROW(config.check_inputs("multitask"));
  const auto summary = run_multitask(config);
  CHECK(summary.multitask_test_error.size() == 2);
  CHECK(summary.refined_test_error.size() == 2);
  for (const char* f : {"multitask.ckpt", "refined_markers.ckpt", "refined_second.ckpt", "multitask_metrics.jsonl"}) {
    CHECK(std::filesystem::exists(config.output_dir / f));
  }
  const auto eval = run_eval(config, config.output_dir / "multitask.ckpt", "second", dir / "test.csv");
  CHECK(eval.error_rate == doctest::Approx(summary.multitask_test_error[1]).epsilon(1e-12));
}

TEST_CASE("subsample keeps the requested share per class") {
  const auto dir = scratch("subsample");
  const auto config = ExperimentConfig::from_json(toy::scratch_experiment(dir, 8, 100, 10));
  const auto sub = run_subsample(config, 0.1, dir / "sub.csv");
  CHECK(sub.size() == 10);
  const auto back = load_dataset(dir / "sub.csv", DatasetFormat::kLabelText, 2);
  CHECK(back.class_counts() == sub.class_counts());
}
