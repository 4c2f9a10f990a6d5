#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ftbert/core/rng.hpp"
#include "ftbert/pretrain/corpus.hpp"
#include "ftbert/text/sequence.hpp"

namespace ftbert {

/// Each content position is corrupted with `mask_prob`; a corrupted position
/// becomes [MASK], a random non-special token, or stays as is.
struct MaskingPolicy {
  double mask_prob = 0.15;
  double replace_mask = 0.8;
  double replace_random = 0.1;
  double keep = 0.1;

  void validate() const;
};

struct NspPair {
  std::vector<int> a;
  std::vector<int> b;
  bool is_next = false;
};

/// Trims the longer segment from its end (A on ties) until both fit in
/// `budget` tokens.
void trim_pair(std::vector<int>& a, std::vector<int>& b, std::size_t budget);

/// Picks a sentence boundary in document `doc`; with probability 0.5 (or as
/// forced) B is the following sentence, otherwise a uniformly chosen sentence
/// of another document. A single-sentence document always yields a random
/// pair. The pair is trimmed to max_len - 3 tokens. Throws ConfigError when
/// the corpus has fewer than two documents.
NspPair build_nsp_pair(std::size_t doc, const TokenizedCorpus& corpus, std::size_t max_len, Rng& rng,
                       std::optional<bool> force_next = std::nullopt);

struct PretrainExample {
  TokenizedSequence sequence;
  /// Corrupted positions and their original ids.
  std::vector<std::size_t> positions;
  std::vector<int> labels;
  bool is_next = false;
};

/// Corrupts content positions only; [CLS], [SEP] and padding are never
/// touched. Random replacements are drawn from the non-special ids.
PretrainExample apply_masking(const TokenizedSequence& seq, const MaskingPolicy& policy,
                              std::size_t vocab_size, Rng& rng);

/// NSP pair + masking for a uniformly chosen document; all randomness comes
/// from `rng`.
PretrainExample sample_pretrain_example(const TokenizedCorpus& corpus, std::size_t max_len,
                                        const MaskingPolicy& policy, std::size_t vocab_size, Rng& rng);

/// `count` examples, the i-th drawn from Rng::derive(seed, i).
std::vector<PretrainExample> make_pretrain_examples(const TokenizedCorpus& corpus, std::size_t count,
                                                    std::size_t max_len, const MaskingPolicy& policy,
                                                    std::size_t vocab_size, std::uint64_t seed);

}  // namespace ftbert
