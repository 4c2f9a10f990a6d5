#include "ftbert/multitask/multitask.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "ftbert/core/error.hpp"
#include "ftbert/optim/adam.hpp"

namespace ftbert {

MixingKind parse_mixing(std::string_view name) {
  if (name == "proportional") return MixingKind::kProportional;
  if (name == "round-robin") return MixingKind::kRoundRobin;
  throw ConfigError("unknown mixing strategy '" + std::string(name) + "'");
}

std::string to_string(MixingKind kind) {
  return kind == MixingKind::kProportional ? "proportional" : "round-robin";
}

TaskSampler::TaskSampler(MixingKind kind, std::vector<std::size_t> sizes, std::uint64_t seed)
    : kind_(kind), sizes_(std::move(sizes)), rng_(seed) {
  total_ = std::accumulate(sizes_.begin(), sizes_.end(), std::size_t{0});
  if (sizes_.empty() || total_ == 0) throw ConfigError("task sampler needs non-empty tasks");
}

std::size_t TaskSampler::next() {
  if (kind_ == MixingKind::kRoundRobin) return calls_++ % sizes_.size();
  ++calls_;
  auto r = rng_.uniform_int(total_);
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (r < sizes_[i]) return i;
    r -= sizes_[i];
  }
  return sizes_.size() - 1;
}

namespace {

// Endless reshuffled pass over one task's training set.
class ExampleStream {
 public:
  ExampleStream(std::size_t size, std::uint64_t seed) : order_(size), seed_(seed) {}

  std::size_t next() {
    if (pos_ == 0) {
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      Rng rng = Rng::derive(seed_, pass_++);
      rng.shuffle(order_);
    }
    const auto out = order_[pos_];
    pos_ = (pos_ + 1) % order_.size();
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::uint64_t seed_;
  std::size_t pos_ = 0;
  std::uint64_t pass_ = 0;
};

int argmax_row(const Tensor<float>& logits) {
  int best = 0;
  for (std::size_t j = 1; j < logits.cols(); ++j) {
    if (logits.at(0, j) > logits.at(0, static_cast<std::size_t>(best))) best = static_cast<int>(j);
  }
  return best;
}

}  // namespace

MultitaskResult multitask_finetune(MultiTaskModel& model, const std::vector<TaskData>& data,
                                   const TrainingRecipe& recipe, MixingKind mixing, MetricsLog* log,
                                   const MultitaskStepHook& on_step) {
  recipe.validate();
  const std::size_t k = model.num_tasks();
  if (k < 2) throw ConfigError("multi-task fine-tuning needs at least two tasks");
  if (data.size() != k) throw ConfigError("one dataset per task required");
  std::vector<std::size_t> sizes;
  for (std::size_t t = 0; t < k; ++t) {
    if (data[t].train.empty()) throw ConfigError("task '" + model.task(t).name + "' has no training data");
    sizes.push_back(data[t].train.size());
  }

  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const std::size_t per_epoch = (n + recipe.batch_size - 1) / recipe.batch_size;
  const std::size_t total = planned_steps(recipe, n);
  MultitaskResult result;
  result.task_steps.assign(k, 0);
  if (total == 0) return result;
  model.encoder().set_dropout(recipe.dropout);

  const LayerwiseLrSchedule layerwise{recipe.base_lr, recipe.decay_factor, model.encoder().config().num_layers};
  std::vector<std::vector<ParameterGroup<float>>> groups;
  std::vector<ExampleStream> streams;
  for (std::size_t t = 0; t < k; ++t) {
    groups.push_back(group_parameters(model.trainable_parameters(t), layerwise));
    streams.emplace_back(sizes[t], recipe.seed ^ (0x7a5cULL + t));
  }
  const StlrSchedule schedule = StlrSchedule::for_updates(total, recipe.warmup_proportion, recipe.base_lr);
  AdamState<float> state(AdamConfig{0.9, 0.999, 1e-8, recipe.clip_norm});
  TaskSampler sampler(mixing, sizes, recipe.seed);

  std::vector<double> loss_sum(k, 0.0);
  std::vector<std::size_t> seen(k, 0), wrong(k, 0);
  for (std::size_t step = 1; step <= total; ++step) {
    const std::size_t t = sampler.next();
    const auto& g = groups[t];
    zero_grads<float>(g);
    Rng dropout_rng = Rng::derive(recipe.seed ^ 0x5eed5eed5eedULL, step);
    const std::size_t batch = std::min(recipe.batch_size, sizes[t]);
    const float inv = 1.0f / static_cast<float>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& ex = data[t].train[streams[t].next()];
      Tape<float> tape;
      const auto logits = model.logits(tape, t, ex.tokens, recipe, Mode::kTrain, &dropout_rng);
      const auto loss = cross_entropy(logits, std::span<const int>(&ex.label, 1));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericError("training loss is not finite at step " + std::to_string(step) + " of task '" +
                           model.task(t).name + "'");
      }
      loss_sum[t] += value;
      wrong[t] += argmax_row(logits.value()) != ex.label;
      ++seen[t];
      tape.backward(scale(loss, inv));
    }
    std::vector<double> rates(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) rates[i] = effective_rate(g[i], schedule, step);
    adam_step<float>(g, rates, state);
    ++result.task_steps[t];
    result.steps = step;
    if (on_step) on_step(step, t);

    if (step % per_epoch == 0 || step == total) {
      const std::size_t epoch = (step - 1) / per_epoch + 1;
      const double rate = schedule.rate(step);
      for (std::size_t u = 0; u < k; ++u) {
        auto emit = [&](MetricsRecord r, const char* split) {
          r.step = step;
          r.epoch = epoch;
          r.task = model.task(u).name;
          r.split = split;
          r.learning_rate = rate;
          if (log) {
            log->add(r);
            r = log->records().back();
          }
          result.records.push_back(std::move(r));
        };
        if (seen[u] > 0) {
          MetricsRecord r;
          r.loss = loss_sum[u] / static_cast<double>(seen[u]);
          r.error_rate = 100.0 * static_cast<double>(wrong[u]) / static_cast<double>(seen[u]);
          emit(r, "train");
        }
        loss_sum[u] = 0.0;
        seen[u] = wrong[u] = 0;
        if (!data[u].validation.empty()) emit(evaluate(model, u, data[u].validation, recipe), "validation");
        if (!data[u].test.empty()) emit(evaluate(model, u, data[u].test, recipe), "test");
      }
    }
  }
  return result;
}

FinetuneResult per_task_refine(MultiTaskModel& model, std::size_t task, const TaskData& data,
                               const TrainingRecipe& recipe, std::optional<double> lower_rate, MetricsLog* log) {
  const double rate = lower_rate.value_or(recipe.base_lr / 2.0);
  if (!(rate < recipe.base_lr)) throw ConfigError("refinement rate must be below the multi-task base rate");
  TrainingRecipe refine = recipe;
  refine.base_lr = rate;
  return finetune(model, task, FinetuneData{data.train, data.validation, data.test}, refine, log);
}

}  // namespace ftbert
