#include "ftbert/experiments/runner.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "ftbert/core/error.hpp"
#include "ftbert/core/log.hpp"
#include "ftbert/model/serialization.hpp"
#include "ftbert/optim/schedule.hpp"

namespace ftbert {

namespace {

Vocabulary load_vocab(const ExperimentConfig& config) {
  if (!std::filesystem::exists(config.vocab)) {
    throw ConfigError("vocabulary '" + config.vocab.string() + "' does not exist; run build-vocab first");
  }
  return Vocabulary::load(config.vocab);
}

std::optional<Checkpoint> load_init(const ExperimentConfig& config) {
  if (!config.init_checkpoint) return std::nullopt;
  return Checkpoint::load(*config.init_checkpoint);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

PreparedData prepare_data(const DataSpec& spec, const WordPieceTokenizer& tokenizer, double validation_fraction,
                          double few_shot_fraction, std::uint64_t seed) {
  PreparedData d;
  const auto full = load_dataset(spec.train, spec.format, spec.num_classes, spec.name);
  auto [train, validation] = split_validation(full, validation_fraction, seed);
  d.train = few_shot_fraction < 1.0 ? subsample(train, few_shot_fraction, seed) : std::move(train);
  d.validation = std::move(validation);
  if (!spec.test.empty()) d.test = load_dataset(spec.test, spec.format, spec.num_classes, spec.name);
  d.train_ids = encode_dataset(d.train, tokenizer);
  d.validation_ids = encode_dataset(d.validation, tokenizer);
  d.test_ids = encode_dataset(d.test, tokenizer);
  return d;
}

MultiTaskModel initial_model(const ExperimentConfig& config, const Vocabulary& vocab,
                             const std::vector<TaskSpec>& tasks, const TrainingRecipe& recipe,
                             const Checkpoint* init) {
  Rng rng(config.seed);
  std::optional<EncoderModel<float>> encoder;
  if (init) {
    const auto hash = init->metadata.value("vocab_hash", std::string{});
    if (hash != vocab.hash()) {
      throw ConfigError("init checkpoint was trained with a different vocabulary (" + hash + " vs " + vocab.hash() + ")");
    }
    encoder.emplace(load_encoder(*init));
  } else {
    EncoderConfig c = config.model;
    c.vocab_size = vocab.size();
    encoder.emplace(c, rng);
  }
  if (encoder->config().max_positions < recipe.max_len) {
    throw ConfigError("recipe max_len " + std::to_string(recipe.max_len) + " exceeds the model's max_positions " +
                      std::to_string(encoder->config().max_positions));
  }
  Rng head_rng = Rng::derive(config.seed, 1);
  return MultiTaskModel(std::move(*encoder), tasks, recipe.long_text, recipe.selection, &head_rng);
}

Vocabulary run_build_vocab(const ExperimentConfig& config) {
  std::vector<std::string> texts;
  auto add = [&](const DataSpec& spec) {
    for (auto& ex : load_dataset(spec.train, spec.format, spec.num_classes, spec.name).examples) {
      texts.push_back(std::move(ex.text));
    }
  };
  add(config.data);
  if (config.pretrain) {
    for (const auto& s : config.pretrain->sources) add(s);
  }
  if (config.multitask) {
    for (const auto& t : config.multitask->tasks) add(t);
  }
  auto vocab = build_vocab(texts, config.vocab_size);
  if (config.vocab.has_parent_path()) std::filesystem::create_directories(config.vocab.parent_path());
  vocab.save(config.vocab);
  log_info("vocabulary of " + std::to_string(vocab.size()) + " tokens written to " + config.vocab.string());
  return vocab;
}

PretrainResult run_pretrain(const ExperimentConfig& config) {
  if (!config.pretrain) throw ConfigError("config has no 'pretrain' block");
  const auto& spec = *config.pretrain;
  const auto vocab = load_vocab(config);
  const WordPieceTokenizer tokenizer(vocab);

  std::vector<DataSpec> specs = spec.sources;
  bool has_main = false;
  for (const auto& s : specs) has_main |= s.name == config.data.name;
  if (!has_main) specs.push_back(config.data);
  std::vector<CorpusSource> sources;
  for (const auto& s : specs) {
    CorpusSource src{s.name, {}, {}};
    for (auto& ex : load_dataset(s.train, s.format, s.num_classes, s.name).examples) {
      src.train_texts.push_back(std::move(ex.text));
    }
    if (!s.test.empty()) {
      for (auto& ex : load_dataset(s.test, s.format, s.num_classes, s.name).examples) {
        src.test_texts.push_back(std::move(ex.text));
      }
    }
    sources.push_back(std::move(src));
  }
  const auto corpus = assemble_corpus(spec.scope, sources, spec.dedup_pairs, spec.language);
  std::filesystem::create_directories(config.output_dir);
  save_corpus(corpus, config.output_dir / "corpus.txt");
  const auto tokenized = tokenize_corpus(corpus, tokenizer);
  log_info("pre-training corpus: " + std::to_string(tokenized.size()) + " documents");

  const auto init = load_init(config);
  EncoderModel<float> model = [&] {
    if (init) return load_encoder(*init);
    EncoderConfig c = config.model;
    c.vocab_size = vocab.size();
    Rng rng(config.seed);
    return EncoderModel<float>(c, rng);
  }();
  if (model.config().max_positions < spec.train.max_len) {
    throw ConfigError("pre-training max_len exceeds the model's max_positions");
  }

  MetricsLog log(config.output_dir / "pretrain_metrics.jsonl", config.strict_deterministic);
  const auto hash = vocab.hash();
  std::size_t last = 0;
  PretrainResult result;
  result = further_pretrain(model, tokenized, spec.train, [&](std::size_t step, const EncoderModel<float>& m) {
    encoder_checkpoint(m, hash, step).save(config.output_dir / ("pretrain_step_" + std::to_string(step) + ".ckpt"));
    last = step;
  });
  const auto save_at = checkpoint_steps(spec.train.steps, spec.train.checkpoint_every);
  std::size_t begin = 0;
  for (const auto step : save_at) {
    PretrainLosses mean;
    for (std::size_t s = begin; s < step; ++s) {
      mean.mlm += result.losses[s].mlm;
      mean.nsp += result.losses[s].nsp;
    }
    const double n = static_cast<double>(step - begin);
    MetricsRecord r;
    r.step = step;
    r.task = "pretrain";
    r.split = "train";
    r.loss = (mean.mlm + mean.nsp) / n;
    r.learning_rate =
        StlrSchedule::for_updates(spec.train.steps, spec.train.warmup_proportion, spec.train.learning_rate).rate(step);
    log.add(r);
    begin = step;
  }
  encoder_checkpoint(model, hash, last).save(config.output_dir / "pretrained.ckpt");
  return result;
}

namespace {

RunSummary finetune_once(const ExperimentConfig& config, const TrainingRecipe& recipe, const Vocabulary& vocab,
                         const PreparedData& data, const Checkpoint* init, MetricsLog* log,
                         const std::filesystem::path* checkpoint_out) {
  RunSummary summary;
  auto model = initial_model(config, vocab, {{config.data.name, config.data.num_classes}}, recipe, init);
  MetricsLog local(config.strict_deterministic);
  MetricsLog& sink = log ? *log : local;
  try {
    const auto result =
        finetune(model, 0, FinetuneData{data.train_ids, data.validation_ids, data.test_ids}, recipe, &sink);
    summary.best_epoch = result.best_epoch;
    summary.validation_error = result.best_validation_error;
    if (!data.test_ids.empty()) {
      auto best = evaluate(model, 0, data.test_ids, recipe);
      best.step = result.steps;
      best.epoch = result.best_epoch;
      best.split = "best_test";
      sink.add(best);
      summary.test_error = best.error_rate;
    }
    if (checkpoint_out) model.to_checkpoint(vocab.hash(), result.steps).save(*checkpoint_out);
  } catch (const NumericError& e) {
    log_warning(std::string("run diverged: ") + e.what());
    summary.diverged = true;
  }
  summary.records = sink.records();
  return summary;
}

}  // namespace

RunSummary run_finetune(const ExperimentConfig& config, const TrainingRecipe& recipe, bool write_outputs) {
  const auto vocab = load_vocab(config);
  const WordPieceTokenizer tokenizer(vocab);
  const auto data =
      prepare_data(config.data, tokenizer, config.validation_fraction, config.few_shot_fraction, config.seed);
  const auto init = load_init(config);
  if (!write_outputs) return finetune_once(config, recipe, vocab, data, init ? &*init : nullptr, nullptr, nullptr);
  std::filesystem::create_directories(config.output_dir);
  MetricsLog log(config.output_dir / "metrics.jsonl", config.strict_deterministic);
  const auto ckpt = config.output_dir / "model.ckpt";
  return finetune_once(config, recipe, vocab, data, init ? &*init : nullptr, &log, &ckpt);
}

RunSummary run_finetune(const ExperimentConfig& config) { return run_finetune(config, config.recipe, true); }

MultitaskSummary run_multitask(const ExperimentConfig& config) {
  if (!config.multitask) throw ConfigError("config has no 'multitask' block");
  const auto& spec = *config.multitask;
  const auto vocab = load_vocab(config);
  const WordPieceTokenizer tokenizer(vocab);
  std::vector<TaskSpec> tasks;
  std::vector<TaskData> data;
  for (const auto& t : spec.tasks) {
    tasks.push_back({t.name, t.num_classes});
    auto p = prepare_data(t, tokenizer, config.validation_fraction, config.few_shot_fraction, config.seed);
    data.push_back({std::move(p.train_ids), std::move(p.validation_ids), std::move(p.test_ids)});
  }
  const auto init = load_init(config);
  auto model = initial_model(config, vocab, tasks, config.recipe, init ? &*init : nullptr);
  std::filesystem::create_directories(config.output_dir);
  MetricsLog log(config.output_dir / "multitask_metrics.jsonl", config.strict_deterministic);
  const auto joint = multitask_finetune(model, data, config.recipe, spec.mixing, &log);
  const auto ckpt = model.to_checkpoint(vocab.hash(), joint.steps);
  ckpt.save(config.output_dir / "multitask.ckpt");

  MultitaskSummary summary;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto rec = evaluate(model, t, data[t].test, config.recipe);
    rec.step = joint.steps;
    rec.split = "multitask_test";
    log.add(rec);
    summary.multitask_test_error.push_back(rec.error_rate);
  }
  if (spec.refine) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      auto refined = MultiTaskModel::from_checkpoint(ckpt);
      const auto res = per_task_refine(refined, t, data[t], config.recipe, spec.refine_lr, &log);
      auto rec = evaluate(refined, t, data[t].test, config.recipe);
      rec.step = res.steps;
      rec.epoch = res.best_epoch;
      rec.split = "refined_test";
      log.add(rec);
      summary.refined_test_error.push_back(rec.error_rate);
      refined.to_checkpoint(vocab.hash(), joint.steps + res.steps)
          .save(config.output_dir / ("refined_" + tasks[t].name + ".ckpt"));
    }
  }
  return summary;
}

MetricsRecord run_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                       const std::string& task, const std::optional<std::filesystem::path>& dataset) {
  const auto vocab = load_vocab(config);
  const WordPieceTokenizer tokenizer(vocab);
  const auto ckpt = Checkpoint::load(checkpoint);
  if (ckpt.metadata.value("vocab_hash", std::string{}) != vocab.hash()) {
    throw ConfigError("checkpoint vocabulary does not match '" + config.vocab.string() + "'");
  }
  const auto model = MultiTaskModel::from_checkpoint(ckpt);
  const std::size_t t = task.empty() ? 0 : model.task_index(task);
  const auto path = dataset ? *dataset : config.data.test;
  const auto ds = load_dataset(path, config.data.format, model.task(t).num_classes, model.task(t).name);
  TrainingRecipe recipe = config.recipe;
  recipe.long_text = model.long_text();
  recipe.selection = model.selection();
  auto rec = evaluate(model, t, encode_dataset(ds, tokenizer), recipe);
  rec.split = "eval";
  rec.step = ckpt.metadata.value("step", std::size_t{0});
  return rec;
}

std::string format_grid_tsv(const std::vector<GridCell>& cells) {
  std::ostringstream out;
  out << "base_lr\tdecay_factor\tstatus\tbest_epoch\tvalidation_error\ttest_error\n";
  for (const auto& c : cells) {
    out << number(c.base_lr) << '\t' << number(c.decay_factor) << '\t';
    if (c.summary.diverged) {
      out << "diverged\tdiverged\tdiverged\tdiverged\n";
    } else {
      out << "ok\t" << c.summary.best_epoch << '\t' << number(c.summary.validation_error) << '\t'
          << number(c.summary.test_error) << '\n';
    }
  }
  return out.str();
}

std::string format_sweep_jsonl(const std::vector<GridCell>& sweep) {
  std::ostringstream out;
  for (const auto& c : sweep) {
    std::map<std::size_t, nlohmann::json> epochs;
    for (const auto& r : c.summary.records) {
      if (r.split != "train" && r.split != "test") continue;
      auto& e = epochs[r.epoch];
      e[r.split + "_error"] = r.error_rate;
      e[r.split + "_loss"] = r.loss;
      e["step"] = r.step;
    }
    for (auto& [epoch, e] : epochs) {
      e["base_lr"] = c.base_lr;
      e["decay_factor"] = c.decay_factor;
      e["epoch"] = epoch;
      e["status"] = "ok";
      out << e.dump() << '\n';
    }
    if (c.summary.diverged) {
      nlohmann::json e{{"base_lr", c.base_lr},
                       {"decay_factor", c.decay_factor},
                       {"epoch", epochs.empty() ? 1 : epochs.rbegin()->first + 1},
                       {"status", "diverged"}};
      out << e.dump() << '\n';
    }
  }
  return out.str();
}

GridReport run_grid(const ExperimentConfig& config) {
  const auto vocab = load_vocab(config);
  const WordPieceTokenizer tokenizer(vocab);
  const auto data =
      prepare_data(config.data, tokenizer, config.validation_fraction, config.few_shot_fraction, config.seed);
  const auto init = load_init(config);

  GridReport report;
  for (double lr : config.grid.learning_rates)
    for (double xi : config.grid.decay_factors) report.cells.push_back({lr, xi, {}});
  for (double lr : config.grid.sweep_learning_rates) report.sweep.push_back({lr, config.recipe.decay_factor, {}});

  std::vector<GridCell*> jobs;
  for (auto& c : report.cells) jobs.push_back(&c);
  for (auto& c : report.sweep) jobs.push_back(&c);
  auto run_job = [&](GridCell& cell) {
    TrainingRecipe recipe = config.recipe;
    recipe.base_lr = cell.base_lr;
    recipe.decay_factor = cell.decay_factor;
    cell.summary = finetune_once(config, recipe, vocab, data, init ? &*init : nullptr, nullptr, nullptr);
    log_info("grid cell lr=" + number(cell.base_lr) + " decay=" + number(cell.decay_factor) +
             (cell.summary.diverged ? ": diverged" : ": test error " + number(cell.summary.test_error) + "%"));
  };

  const std::size_t workers = std::min(config.grid.workers, jobs.size());
  if (workers <= 1) {
    for (auto* j : jobs) run_job(*j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(*jobs[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::filesystem::create_directories(config.output_dir);
  write_text(config.output_dir / "grid.tsv", format_grid_tsv(report.cells));
  write_text(config.output_dir / "sweep.jsonl", format_sweep_jsonl(report.sweep));
  return report;
}

Dataset run_subsample(const ExperimentConfig& config, double proportion, const std::filesystem::path& out) {
  const auto ds = load_dataset(config.data.train, config.data.format, config.data.num_classes, config.data.name);
  auto sub = subsample(ds, proportion, config.seed);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  save_dataset(sub, out);
  return sub;
}

}  // namespace ftbert
