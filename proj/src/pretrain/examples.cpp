#include "ftbert/pretrain/examples.hpp"

#include <cmath>

#include "ftbert/core/error.hpp"
#include "ftbert/text/vocab.hpp"

namespace ftbert {

void MaskingPolicy::validate() const {
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw ConfigError("mask_prob must lie in [0, 1]");
  for (double p : {replace_mask, replace_random, keep}) {
    if (!(p >= 0.0)) throw ConfigError("masking split probabilities must be >= 0");
  }
  if (std::abs(replace_mask + replace_random + keep - 1.0) > 1e-9) {
    throw ConfigError("masking split probabilities must sum to 1");
  }
}

void trim_pair(std::vector<int>& a, std::vector<int>& b, std::size_t budget) {
  while (a.size() + b.size() > budget) {
    if (a.size() >= b.size()) {
      a.pop_back();
    } else {
      b.pop_back();
    }
  }
}

namespace {

const std::vector<int>& random_foreign_sentence(std::size_t doc, const TokenizedCorpus& corpus, Rng& rng) {
  auto other = static_cast<std::size_t>(rng.uniform_int(corpus.size() - 1));
  if (other >= doc) ++other;
  const auto& sentences = corpus[other];
  return sentences[static_cast<std::size_t>(rng.uniform_int(sentences.size()))];
}

}  // namespace

NspPair build_nsp_pair(std::size_t doc, const TokenizedCorpus& corpus, std::size_t max_len, Rng& rng,
                       std::optional<bool> force_next) {
  if (corpus.size() < 2) throw ConfigError("next-sentence pairs need at least two documents");
  if (doc >= corpus.size()) throw ConfigError("document index out of range");
  if (max_len < 5) throw ConfigError("max_len must leave room for both segments");
  const auto& sentences = corpus[doc];
  NspPair pair;
  if (sentences.size() < 2) {
    pair.a = sentences.front();
    pair.b = random_foreign_sentence(doc, corpus, rng);
  } else {
    const auto i = static_cast<std::size_t>(rng.uniform_int(sentences.size() - 1));
    pair.a = sentences[i];
    pair.is_next = force_next ? *force_next : rng.bernoulli(0.5);
    pair.b = pair.is_next ? sentences[i + 1] : random_foreign_sentence(doc, corpus, rng);
  }
  trim_pair(pair.a, pair.b, max_len - 3);
  return pair;
}

PretrainExample apply_masking(const TokenizedSequence& seq, const MaskingPolicy& policy, std::size_t vocab_size,
                              Rng& rng) {
  policy.validate();
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kNumReserved)) {
    throw ConfigError("vocabulary has no non-special tokens to sample");
  }
  PretrainExample ex;
  ex.sequence = seq;
  const auto n_random = vocab_size - Vocabulary::kNumReserved;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int id = seq.token_ids[i];
    if (seq.attention_mask[i] == 0 || id == Vocabulary::kCls || id == Vocabulary::kSep) continue;
    if (!rng.bernoulli(policy.mask_prob)) continue;
    ex.positions.push_back(i);
    ex.labels.push_back(id);
    const double r = rng.uniform();
    if (r < policy.replace_mask) {
      ex.sequence.token_ids[i] = Vocabulary::kMask;
    } else if (r < policy.replace_mask + policy.replace_random) {
      ex.sequence.token_ids[i] = Vocabulary::kNumReserved + static_cast<int>(rng.uniform_int(n_random));
    }
  }
  return ex;
}

PretrainExample sample_pretrain_example(const TokenizedCorpus& corpus, std::size_t max_len,
                                        const MaskingPolicy& policy, std::size_t vocab_size, Rng& rng) {
  if (corpus.empty()) throw ConfigError("empty pre-training corpus");
  const auto doc = static_cast<std::size_t>(rng.uniform_int(corpus.size()));
  const auto pair = build_nsp_pair(doc, corpus, max_len, rng);
  const auto seq = encode_segments(pair.a, std::span<const int>(pair.b), max_len);
  auto ex = apply_masking(seq, policy, vocab_size, rng);
  ex.is_next = pair.is_next;
  return ex;
}

std::vector<PretrainExample> make_pretrain_examples(const TokenizedCorpus& corpus, std::size_t count,
                                                    std::size_t max_len, const MaskingPolicy& policy,
                                                    std::size_t vocab_size, std::uint64_t seed) {
  std::vector<PretrainExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::derive(seed, i);
    out.push_back(sample_pretrain_example(corpus, max_len, policy, vocab_size, rng));
  }
  return out;
}

}  // namespace ftbert
