#include "ftbert/experiments/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ftbert/core/error.hpp"
#include "ftbert/optim/adam.hpp"

namespace ftbert {

namespace {

int argmax_row(const Tensor<float>& logits) {
  int best = 0;
  for (std::size_t j = 1; j < logits.cols(); ++j) {
    if (logits.at(0, j) > logits.at(0, static_cast<std::size_t>(best))) best = static_cast<int>(j);
  }
  return best;
}

double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

MetricsRecord make_record(std::size_t step, std::size_t epoch, const std::string& task, const std::string& split,
                          double loss, double error, double rate) {
  MetricsRecord r;
  r.step = step;
  r.epoch = epoch;
  r.task = task;
  r.split = split;
  r.loss = loss;
  r.error_rate = error;
  r.learning_rate = rate;
  return r;
}

}  // namespace

MetricsRecord evaluate(const MultiTaskModel& model, std::size_t task, std::span<const EncodedExample> examples,
                       const TrainingRecipe& recipe, std::vector<int>* predictions) {
  MetricsRecord rec;
  rec.task = model.task(task).name;
  if (predictions) predictions->clear();
  if (examples.empty()) return rec;
  std::vector<double> losses;
  losses.reserve(examples.size());
  std::size_t wrong = 0;
  for (const auto& ex : examples) {
    Tape<float> tape;
    const auto logits = model.logits(tape, task, ex.tokens, recipe, Mode::kEval, nullptr);
    losses.push_back(cross_entropy(logits, std::span<const int>(&ex.label, 1)).value().item());
    const int pred = argmax_row(logits.value());
    wrong += pred != ex.label;
    if (predictions) predictions->push_back(pred);
  }
  const double n = static_cast<double>(examples.size());
  rec.loss = sorted_sum(std::move(losses)) / n;
  rec.error_rate = 100.0 * static_cast<double>(wrong) / n;
  return rec;
}

std::size_t planned_steps(const TrainingRecipe& recipe, std::size_t examples) {
  const std::size_t per_epoch = (examples + recipe.batch_size - 1) / recipe.batch_size;
  const std::size_t total = per_epoch * recipe.epochs;
  return recipe.train_steps ? std::min(total, *recipe.train_steps) : total;
}

FinetuneResult finetune(MultiTaskModel& model, std::size_t task, const FinetuneData& data,
                        const TrainingRecipe& recipe, MetricsLog* log) {
  recipe.validate();
  if (data.train.empty()) throw ConfigError("fine-tuning needs training examples");
  const auto& name = model.task(task).name;

  const auto params = model.trainable_parameters(task);
  const auto groups = group_parameters(
      params, LayerwiseLrSchedule{recipe.base_lr, recipe.decay_factor, model.encoder().config().num_layers});
  const std::size_t n = data.train.size();
  const std::size_t per_epoch = (n + recipe.batch_size - 1) / recipe.batch_size;
  const std::size_t total = planned_steps(recipe, n);

  FinetuneResult result;
  if (total == 0) return result;
  model.encoder().set_dropout(recipe.dropout);
  const StlrSchedule schedule = StlrSchedule::for_updates(total, recipe.warmup_proportion, recipe.base_lr);
  AdamState<float> state(AdamConfig{0.9, 0.999, 1e-8, recipe.clip_norm});
  auto emit = [&](MetricsRecord r) {
    if (log) {
      log->add(r);
      r = log->records().back();
    }
    result.records.push_back(std::move(r));
  };

  std::vector<Tensor<float>> best_values;
  bool have_best = false;
  std::vector<std::size_t> order(n);
  double epoch_loss = 0.0;
  std::size_t epoch_wrong = 0, epoch_seen = 0;
  std::vector<double> rates(groups.size());

  for (std::size_t step = 1; step <= total; ++step) {
    const std::size_t epoch = (step - 1) / per_epoch + 1;
    const std::size_t in_epoch = (step - 1) % per_epoch;
    if (in_epoch == 0) {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng shuffle_rng = Rng::derive(recipe.seed, epoch);
      shuffle_rng.shuffle(order);
    }
    zero_grads<float>(groups);
    Rng dropout_rng = Rng::derive(recipe.seed ^ 0x5eed5eed5eedULL, step);
    const std::size_t begin = in_epoch * recipe.batch_size;
    const std::size_t end = std::min(n, begin + recipe.batch_size);
    const float inv = 1.0f / static_cast<float>(end - begin);
    for (std::size_t b = begin; b < end; ++b) {
      const auto& ex = data.train[order[b]];
      Tape<float> tape;
      const auto logits = model.logits(tape, task, ex.tokens, recipe, Mode::kTrain, &dropout_rng);
      const auto loss = cross_entropy(logits, std::span<const int>(&ex.label, 1));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericError("training loss is not finite at step " + std::to_string(step) + " of task '" + name + "'");
      }
      epoch_loss += value;
      epoch_wrong += argmax_row(logits.value()) != ex.label;
      ++epoch_seen;
      tape.backward(scale(loss, inv));
    }
    for (std::size_t g = 0; g < groups.size(); ++g) rates[g] = effective_rate(groups[g], schedule, step);
    adam_step<float>(groups, rates, state);
    result.steps = step;

    if (in_epoch + 1 == per_epoch || step == total) {
      const double top_rate = schedule.rate(step);
      emit(make_record(step, epoch, name, "train", epoch_loss / static_cast<double>(epoch_seen),
                       100.0 * static_cast<double>(epoch_wrong) / static_cast<double>(epoch_seen), top_rate));
      epoch_loss = 0.0;
      epoch_wrong = epoch_seen = 0;
      if (!data.validation.empty()) {
        auto r = evaluate(model, task, data.validation, recipe);
        if (!std::isfinite(r.loss)) throw NumericError("validation loss is not finite for task '" + name + "'");
        if (!have_best || r.error_rate < result.best_validation_error) {
          have_best = true;
          result.best_epoch = epoch;
          result.best_validation_error = r.error_rate;
          best_values.clear();
          for (const auto* p : params) best_values.push_back(p->value);
        }
        emit(make_record(step, epoch, name, "validation", r.loss, r.error_rate, top_rate));
      } else {
        result.best_epoch = epoch;
      }
      if (!data.test.empty()) {
        auto r = evaluate(model, task, data.test, recipe);
        emit(make_record(step, epoch, name, "test", r.loss, r.error_rate, top_rate));
      }
    }
  }
  if (have_best) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  }
  return result;
}

}  // namespace ftbert
