#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ftbert/model/encoder.hpp"
#include "ftbert/pretrain/examples.hpp"

namespace ftbert {

struct PretrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  std::size_t max_len = 128;
  double learning_rate = 5e-5;
  double warmup_proportion = 0.1;
  MaskingPolicy masking;
  /// 0: only the final step is checkpointed.
  std::size_t checkpoint_every = 0;
  double clip_norm = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Multiples of `every` up to `steps`, plus `steps` itself.
std::vector<std::size_t> checkpoint_steps(std::size_t steps, std::size_t every);

struct PretrainLosses {
  double mlm = 0.0;
  double nsp = 0.0;
  double total() const { return mlm + nsp; }
};

/// Eval-mode losses: MLM cross-entropy averaged over all labelled positions,
/// NSP cross-entropy averaged over examples.
PretrainLosses pretrain_loss(const EncoderModel<float>& model, std::span<const PretrainExample> examples);

using CheckpointSink = std::function<void(std::size_t step, const EncoderModel<float>&)>;

struct PretrainResult {
  /// Training losses, one per step.
  std::vector<PretrainLosses> losses;
  std::vector<std::size_t> checkpoints;
};

/// Joint MLM + NSP training (unweighted sum, batch mean) with Adam under a
/// slanted triangular schedule and one rate for all parameters. Optimizer
/// state starts fresh. `sink` receives the model at every checkpoint step.
/// Throws ConfigError when the corpus has fewer sentences than one batch or
/// fewer than two documents, NumericError on a non-finite loss or gradient.
PretrainResult further_pretrain(EncoderModel<float>& model, const TokenizedCorpus& corpus,
                                const PretrainConfig& config, const CheckpointSink& sink = {});

}  // namespace ftbert
