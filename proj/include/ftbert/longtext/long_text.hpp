#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftbert/core/tape.hpp"
#include "ftbert/model/encoder.hpp"
#include "ftbert/text/sequence.hpp"

namespace ftbert {

/// The six ways of feeding a document longer than the model window.
enum class LongTextStrategy { kHeadOnly, kTailOnly, kHeadTail, kHierMean, kHierMax, kHierAttn };

/// head_only | tail_only | head_tail | hier_mean | hier_max | hier_attn
LongTextStrategy parse_long_text_strategy(std::string_view text);
std::string to_string(LongTextStrategy strategy);
bool is_hierarchical(LongTextStrategy strategy);

struct TruncationStrategy {
  enum class Kind { kHeadOnly, kTailOnly, kHeadTail };

  Kind kind = Kind::kHeadTail;
  std::size_t head_budget = 128;
  std::size_t tail_budget = 382;
  /// Content tokens that fit beside [CLS] and [SEP] (512 - 2).
  std::size_t capacity = 510;

  /// Same kind for a smaller window; the head/tail split keeps the 128:382
  /// ratio, head = round(capacity * 128 / 510), tail = capacity - head.
  static TruncationStrategy for_capacity(Kind kind, std::size_t capacity);

  /// Throws ConfigError if head + tail != capacity.
  void validate() const;
};

/// Inputs no longer than the capacity come back unchanged; otherwise
/// head-only keeps the first `capacity` tokens, tail-only the last, and
/// head+tail the first head_budget followed by the last tail_budget.
std::vector<int> truncate(std::span<const int> tokens, const TruncationStrategy& strategy);

/// k = ceil(L / capacity) contiguous fractions, each wrapped as
/// [CLS] piece [SEP] and padded to capacity + 2. Empty input gives a single
/// empty fraction.
struct ChunkedDocument {
  std::vector<TokenizedSequence> fractions;
  std::size_t size() const { return fractions.size(); }
};

ChunkedDocument chunk(std::span<const int> tokens, std::size_t capacity = 510);

/// Merges the k fraction representations ([k x H]) into one [1 x H] vector.
/// The self-attention variant scores each fraction with a learned query
/// against projected keys, w = softmax(q . K_i / sqrt(H)), and returns
/// sum_i w_i V_i. The value projection starts as the identity.
template <typename T>
class FractionCombiner {
 public:
  enum class Kind { kMean, kMax, kSelfAttention };

  /// Mean or max pooling (no parameters).
  explicit FractionCombiner(Kind kind);
  /// Self-attention with parameters "<prefix>.query", "<prefix>.key", "<prefix>.value".
  FractionCombiner(ParameterStore<T>& store, const std::string& prefix, std::size_t hidden,
                   Rng* rng, double init_std = 0.02);

  Kind kind() const { return kind_; }
  /// `weights`, when given, receives the [1 x k] attention distribution.
  Var<T> combine(Var<T> fractions, Tensor<T>* weights = nullptr) const;
  std::vector<Parameter<T>*> parameters() const;

 private:
  Kind kind_;
  Parameter<T>* query_ = nullptr;
  Parameter<T>* key_ = nullptr;
  Parameter<T>* value_ = nullptr;
};

}  // namespace ftbert
