#include "ftbert/model/encoder.hpp"

#include <cmath>
#include <limits>

namespace ftbert {

template <typename T>
Parameter<T>& ParameterStore<T>::add(std::string name, Tensor<T> value) {
  if (find(name)) throw ConfigError("duplicate parameter '" + name + "'");
  params_.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(value)));
  return *params_.back();
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::all() const {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
std::size_t ParameterStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------

template <typename T>
EncoderModel<T>::EncoderModel(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  config_.ffn = config_.ffn_size();
  build(&rng);
}

template <typename T>
EncoderModel<T>::EncoderModel(const EncoderConfig& config) : config_(config) {
  config_.validate();
  config_.ffn = config_.ffn_size();
  build(nullptr);
}

template <typename T>
Parameter<T>* EncoderModel<T>::weight(const std::string& name, Shape shape, Rng* rng) {
  Tensor<T> value(std::move(shape));
  if (rng) {
    for (auto& v : value.data()) v = static_cast<T>(rng->truncated_normal(config_.init_std));
  }
  return &store_.add(name, std::move(value));
}

template <typename T>
Parameter<T>* EncoderModel<T>::zeros(const std::string& name, Shape shape) {
  return &store_.add(name, Tensor<T>(std::move(shape)));
}

template <typename T>
Parameter<T>* EncoderModel<T>::ones(const std::string& name, Shape shape) {
  return &store_.add(name, Tensor<T>(std::move(shape), T{1}));
}

template <typename T>
void EncoderModel<T>::build(Rng* rng) {
  const std::size_t h = config_.hidden, f = config_.ffn_size();
  token_emb_ = weight("embeddings.token", {config_.vocab_size, h}, rng);
  position_emb_ = weight("embeddings.position", {config_.max_positions, h}, rng);
  segment_emb_ = weight("embeddings.segment", {config_.type_vocab, h}, rng);
  emb_gain_ = ones("embeddings.norm.gain", {h});
  emb_bias_ = zeros("embeddings.norm.bias", {h});
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "encoder.layer." + std::to_string(l) + ".";
    Block b{};
    b.wq = weight(p + "attention.query.weight", {h, h}, rng);
    b.bq = zeros(p + "attention.query.bias", {h});
    b.wk = weight(p + "attention.key.weight", {h, h}, rng);
    b.bk = zeros(p + "attention.key.bias", {h});
    b.wv = weight(p + "attention.value.weight", {h, h}, rng);
    b.bv = zeros(p + "attention.value.bias", {h});
    b.wo = weight(p + "attention.output.weight", {h, h}, rng);
    b.bo = zeros(p + "attention.output.bias", {h});
    b.attn_gain = ones(p + "attention.norm.gain", {h});
    b.attn_bias = zeros(p + "attention.norm.bias", {h});
    b.w_in = weight(p + "ffn.in.weight", {h, f}, rng);
    b.b_in = zeros(p + "ffn.in.bias", {f});
    b.w_out = weight(p + "ffn.out.weight", {f, h}, rng);
    b.b_out = zeros(p + "ffn.out.bias", {h});
    b.ffn_gain = ones(p + "ffn.norm.gain", {h});
    b.ffn_bias = zeros(p + "ffn.norm.bias", {h});
    blocks_.push_back(b);
  }
  mlm_w_ = weight("mlm.transform.weight", {h, h}, rng);
  mlm_b_ = zeros("mlm.transform.bias", {h});
  mlm_gain_ = ones("mlm.norm.gain", {h});
  mlm_bias_ = zeros("mlm.norm.bias", {h});
  mlm_out_bias_ = zeros("mlm.output.bias", {config_.vocab_size});
  nsp_w_ = weight("nsp.weight", {h, 2}, rng);
  nsp_b_ = zeros("nsp.bias", {2});
}

template <typename T>
std::vector<Parameter<T>*> EncoderModel<T>::backbone_parameters() const {
  std::vector<Parameter<T>*> out;
  for (auto* p : store_.all()) {
    if (p->name.rfind("embeddings.", 0) == 0 || p->name.rfind("encoder.", 0) == 0) out.push_back(p);
  }
  return out;
}

template <typename T>
void EncoderModel<T>::set_dropout(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  config_.dropout = p;
}

template <typename T>
LayerOutputs<T> EncoderModel<T>::encode(Tape<T>& tape, const TokenizedSequence& seq, Mode mode,
                                        Rng* dropout_rng, const EncodeOptions& options) const {
  const bool training = mode == Mode::kTrain && config_.dropout > 0.0;
  if (training && !dropout_rng) throw ConfigError("training-mode encode needs a dropout rng");
  std::size_t len = seq.size();
  if (options.drop_padding) len = seq.unpadded_length();
  if (len > config_.max_positions) {
    throw ConfigError("sequence length " + std::to_string(len) + " exceeds max_positions " +
                      std::to_string(config_.max_positions));
  }
  if (len == 0) throw ConfigError("cannot encode an empty sequence");
  const std::span<const int> ids(seq.token_ids.data(), len);
  const std::span<const int> segments(seq.segment_ids.data(), len);
  const std::span<const int> positions(seq.position_ids.data(), len);
  Rng dummy(0);
  Rng& rng = dropout_rng ? *dropout_rng : dummy;
  const double p_drop = config_.dropout;

  LayerOutputs<T> out;
  auto x = add(add(embedding(tape.param(*token_emb_), ids),
                   embedding(tape.param(*position_emb_), positions)),
               embedding(tape.param(*segment_emb_), segments));
  x = dropout(layer_norm(x, tape.param(*emb_gain_), tape.param(*emb_bias_)), p_drop, rng,
              training);
  out.hidden.push_back(x);

  Tensor<T> mask_row({1, len});
  for (std::size_t i = 0; i < len; ++i) {
    mask_row[i] = seq.attention_mask[i] ? T{0} : -std::numeric_limits<T>::infinity();
  }
  const auto mask = tape.constant(std::move(mask_row));
  const std::size_t heads = config_.heads;
  const std::size_t head_dim = config_.hidden / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  for (const auto& b : blocks_) {
    const auto q = add_row(matmul(x, tape.param(*b.wq)), tape.param(*b.bq));
    const auto k = add_row(matmul(x, tape.param(*b.wk)), tape.param(*b.bk));
    const auto v = add_row(matmul(x, tape.param(*b.wv)), tape.param(*b.bv));
    std::vector<Var<T>> contexts;
    std::vector<Tensor<T>> probes;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const auto qh = slice_cols(q, hd * head_dim, head_dim);
      const auto kh = slice_cols(k, hd * head_dim, head_dim);
      const auto vh = slice_cols(v, hd * head_dim, head_dim);
      auto probs = softmax(add_row(scale(matmul_nt(qh, kh), inv_sqrt), mask));
      if (options.record_attention) probes.push_back(probs.value());
      probs = dropout(probs, p_drop, rng, training);
      contexts.push_back(matmul(probs, vh));
    }
    if (options.record_attention) out.attention.push_back(std::move(probes));
    const auto context = heads == 1 ? contexts[0] : concat_cols(contexts);
    auto attn = add_row(matmul(context, tape.param(*b.wo)), tape.param(*b.bo));
    attn = dropout(attn, p_drop, rng, training);
    x = layer_norm(add(x, attn), tape.param(*b.attn_gain), tape.param(*b.attn_bias));

    auto ff = gelu(add_row(matmul(x, tape.param(*b.w_in)), tape.param(*b.b_in)));
    ff = add_row(matmul(ff, tape.param(*b.w_out)), tape.param(*b.b_out));
    ff = dropout(ff, p_drop, rng, training);
    x = layer_norm(add(x, ff), tape.param(*b.ffn_gain), tape.param(*b.ffn_bias));
    out.hidden.push_back(x);
  }
  return out;
}

template <typename T>
Var<T> EncoderModel<T>::mlm_logits(Var<T> hidden) const {
  Tape<T>& tape = *hidden.tape;
  auto t = gelu(add_row(matmul(hidden, tape.param(*mlm_w_)), tape.param(*mlm_b_)));
  t = layer_norm(t, tape.param(*mlm_gain_), tape.param(*mlm_bias_));
  return add_row(matmul_nt(t, tape.param(*token_emb_)), tape.param(*mlm_out_bias_));
}

template <typename T>
Var<T> EncoderModel<T>::mlm_logits(Var<T> hidden, std::span<const std::size_t> positions) const {
  return mlm_logits(gather_rows(hidden, positions));
}

template <typename T>
Var<T> EncoderModel<T>::nsp_logits(Var<T> hidden) const {
  Tape<T>& tape = *hidden.tape;
  return add_row(matmul(row(hidden, 0), tape.param(*nsp_w_)), tape.param(*nsp_b_));
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class EncoderModel<float>;
template class EncoderModel<double>;

}  // namespace ftbert
