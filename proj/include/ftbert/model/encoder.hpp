#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ftbert/core/ops.hpp"
#include "ftbert/core/rng.hpp"
#include "ftbert/core/tape.hpp"
#include "ftbert/model/config.hpp"
#include "ftbert/text/sequence.hpp"

namespace ftbert {

enum class Mode { kTrain, kEval };

/// Hidden states of one forward pass: index 0 is the embedding output,
/// index l the output of block l.
template <typename T>
struct LayerOutputs {
  std::vector<Var<T>> hidden;
  /// attention[l][h] = [seq x seq] probabilities of block l+1, head h.
  /// Filled only when EncodeOptions::record_attention is set.
  std::vector<std::vector<Tensor<T>>> attention;

  Var<T> top() const { return hidden.back(); }
};

struct EncodeOptions {
  bool record_attention = false;
  /// Run only the unpadded prefix. [PAD] keys are masked out anyway, so the
  /// unpadded outputs are bitwise identical; the hidden states then have
  /// unpadded_length() rows.
  bool drop_padding = false;
};

/// Owns a set of named parameters with stable addresses.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value);
  std::vector<Parameter<T>*> all() const;
  Parameter<T>* find(std::string_view name) const;
  std::size_t count() const;
  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

/// Mini-BERT: token + position + segment embeddings, L post-norm transformer
/// blocks, and the masked-LM / next-sentence heads. The MLM output projection
/// is tied to the token embedding matrix.
template <typename T>
class EncoderModel {
 public:
  /// Random initialisation: truncated normal(0, init_std) weights and
  /// embeddings, zero biases, unit layer-norm gains. Deterministic in `rng`.
  EncoderModel(const EncoderConfig& config, Rng& rng);
  /// Zero weights, unit gains; for loading checkpoints.
  explicit EncoderModel(const EncoderConfig& config);

  EncoderModel(EncoderModel&&) noexcept = default;
  EncoderModel& operator=(EncoderModel&&) noexcept = default;

  const EncoderConfig& config() const { return config_; }
  /// Fine-tuning recipes may train with a different dropout than pre-training.
  void set_dropout(double p);

  /// Throws ConfigError when the sequence is longer than max_positions.
  /// `dropout_rng` is required in training mode when dropout > 0.
  LayerOutputs<T> encode(Tape<T>& tape, const TokenizedSequence& seq, Mode mode,
                         Rng* dropout_rng = nullptr, const EncodeOptions& options = {}) const;

  /// [rows x vocab] masked-LM logits for every row of `hidden`.
  Var<T> mlm_logits(Var<T> hidden) const;
  /// Same, restricted to the given rows.
  Var<T> mlm_logits(Var<T> hidden, std::span<const std::size_t> positions) const;
  /// [1 x 2] next-sentence logits from the [CLS] row.
  Var<T> nsp_logits(Var<T> hidden) const;

  std::vector<Parameter<T>*> parameters() const { return store_.all(); }
  /// Embeddings and transformer blocks (what fine-tuning shares).
  std::vector<Parameter<T>*> backbone_parameters() const;
  Parameter<T>* find(std::string_view name) const { return store_.find(name); }
  std::size_t parameter_count() const { return store_.count(); }

 private:
  struct Block {
    Parameter<T>*wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Parameter<T>*attn_gain, *attn_bias;
    Parameter<T>*w_in, *b_in, *w_out, *b_out;
    Parameter<T>*ffn_gain, *ffn_bias;
  };

  void build(Rng* rng);
  Parameter<T>* weight(const std::string& name, Shape shape, Rng* rng);
  Parameter<T>* zeros(const std::string& name, Shape shape);
  Parameter<T>* ones(const std::string& name, Shape shape);

  EncoderConfig config_;
  ParameterStore<T> store_;
  Parameter<T>*token_emb_, *position_emb_, *segment_emb_, *emb_gain_, *emb_bias_;
  std::vector<Block> blocks_;
  Parameter<T>*mlm_w_, *mlm_b_, *mlm_gain_, *mlm_bias_, *mlm_out_bias_;
  Parameter<T>*nsp_w_, *nsp_b_;
};

/// Copies values between models with the same parameter names; used to move a
/// float model into 64-bit mode for gradient checks.
template <typename To, typename From>
void copy_parameter_values(const std::vector<Parameter<To>*>& dst,
                           const std::vector<Parameter<From>*>& src) {
  if (dst.size() != src.size()) throw ShapeError("copy_parameter_values: parameter count differs");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->name != src[i]->name || dst[i]->value.shape() != src[i]->value.shape()) {
      throw ShapeError("copy_parameter_values: '" + dst[i]->name + "' vs '" + src[i]->name + "'");
    }
    dst[i]->value = src[i]->value.template cast<To>();
  }
}

}  // namespace ftbert
