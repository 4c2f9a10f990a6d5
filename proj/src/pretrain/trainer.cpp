#include "ftbert/pretrain/trainer.hpp"

#include <cmath>
#include <string>

#include "ftbert/core/error.hpp"
#include "ftbert/core/log.hpp"
#include "ftbert/optim/adam.hpp"

namespace ftbert {

void PretrainConfig::validate() const {
  if (steps < 1) throw ConfigError("pre-training steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("pre-training learning rate must be > 0");
  masking.validate();
  StlrSchedule{steps, warmup_proportion, learning_rate}.validate();
}

std::vector<std::size_t> checkpoint_steps(std::size_t steps, std::size_t every) {
  std::vector<std::size_t> out;
  if (every > 0) {
    for (std::size_t s = every; s < steps; s += every) out.push_back(s);
  }
  out.push_back(steps);
  return out;
}

namespace {

struct ExampleLoss {
  Var<float> total;
  double mlm = 0.0;
  double nsp = 0.0;
};

ExampleLoss example_loss(const EncoderModel<float>& model, Tape<float>& tape, const PretrainExample& ex, Mode mode,
                         Rng* dropout_rng) {
  EncodeOptions opts;
  opts.drop_padding = true;
  const auto out = model.encode(tape, ex.sequence, mode, dropout_rng, opts);
  const int nsp_target = ex.is_next ? 1 : 0;
  const auto nsp = cross_entropy(model.nsp_logits(out.top()), std::span<const int>(&nsp_target, 1));
  ExampleLoss loss{nsp, 0.0, nsp.value().item()};
  if (!ex.positions.empty()) {
    const auto mlm = cross_entropy(model.mlm_logits(out.top(), ex.positions), std::span<const int>(ex.labels));
    loss.mlm = mlm.value().item();
    loss.total = add(mlm, nsp);
  }
  return loss;
}

}  // namespace

PretrainLosses pretrain_loss(const EncoderModel<float>& model, std::span<const PretrainExample> examples) {
  PretrainLosses mean;
  if (examples.empty()) return mean;
  std::size_t labelled = 0;
  for (const auto& ex : examples) {
    Tape<float> tape;
    const auto l = example_loss(model, tape, ex, Mode::kEval, nullptr);
    mean.mlm += l.mlm * static_cast<double>(ex.positions.size());
    mean.nsp += l.nsp;
    labelled += ex.positions.size();
  }
  mean.mlm = labelled > 0 ? mean.mlm / static_cast<double>(labelled) : 0.0;
  mean.nsp /= static_cast<double>(examples.size());
  return mean;
}

PretrainResult further_pretrain(EncoderModel<float>& model, const TokenizedCorpus& corpus,
                                const PretrainConfig& config, const CheckpointSink& sink) {
  config.validate();
  std::size_t sentences = 0;
  for (const auto& doc : corpus) sentences += doc.size();
  if (corpus.size() < 2 || sentences < config.batch_size) {
    throw ConfigError("pre-training corpus (" + std::to_string(corpus.size()) + " documents, " +
                      std::to_string(sentences) + " sentences) is smaller than one batch of " +
                      std::to_string(config.batch_size));
  }
  const auto vocab = model.config().vocab_size;
  const auto params = model.parameters();
  const auto groups = single_group(params);
  AdamState<float> state(AdamConfig{0.9, 0.999, 1e-8, config.clip_norm});
  const StlrSchedule schedule =
      StlrSchedule::for_updates(config.steps, config.warmup_proportion, config.learning_rate);
  const auto save_at = checkpoint_steps(config.steps, config.checkpoint_every);
  auto next_save = save_at.begin();

  PretrainResult result;
  const float inv_batch = 1.0f / static_cast<float>(config.batch_size);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    zero_grads<float>(groups);
    Rng rng = Rng::derive(config.seed, step);
    PretrainLosses losses;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto ex = sample_pretrain_example(corpus, config.max_len, config.masking, vocab, rng);
      Tape<float> tape;
      const auto l = example_loss(model, tape, ex, Mode::kTrain, &rng);
      if (!std::isfinite(l.mlm) || !std::isfinite(l.nsp)) {
        throw NumericError("pre-training loss is not finite at step " + std::to_string(step));
      }
      tape.backward(scale(l.total, inv_batch));
      losses.mlm += l.mlm / static_cast<double>(config.batch_size);
      losses.nsp += l.nsp / static_cast<double>(config.batch_size);
    }
    const double rate = schedule.rate(step);
    adam_step<float>(groups, std::vector<double>{rate}, state);
    result.losses.push_back(losses);
    if (next_save != save_at.end() && *next_save == step) {
      result.checkpoints.push_back(step);
      if (sink) sink(step, model);
      ++next_save;
    }
  }
  log_info("pre-training finished: " + std::to_string(config.steps) + " steps, last loss " +
           std::to_string(result.losses.back().total()));
  return result;
}

}  // namespace ftbert
