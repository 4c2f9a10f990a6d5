#include "ftbert/longtext/long_text.hpp"

#include <cmath>

#include "ftbert/core/error.hpp"

namespace ftbert {

LongTextStrategy parse_long_text_strategy(std::string_view text) {
  if (text == "head_only") return LongTextStrategy::kHeadOnly;
  if (text == "tail_only") return LongTextStrategy::kTailOnly;
  if (text == "head_tail") return LongTextStrategy::kHeadTail;
  if (text == "hier_mean") return LongTextStrategy::kHierMean;
  if (text == "hier_max") return LongTextStrategy::kHierMax;
  if (text == "hier_attn") return LongTextStrategy::kHierAttn;
  throw ConfigError("unknown truncation strategy '" + std::string(text) + "'");
}

std::string to_string(LongTextStrategy strategy) {
  switch (strategy) {
    case LongTextStrategy::kHeadOnly: return "head_only";
    case LongTextStrategy::kTailOnly: return "tail_only";
    case LongTextStrategy::kHeadTail: return "head_tail";
    case LongTextStrategy::kHierMean: return "hier_mean";
    case LongTextStrategy::kHierMax: return "hier_max";
    case LongTextStrategy::kHierAttn: return "hier_attn";
  }
  return "head_tail";
}

bool is_hierarchical(LongTextStrategy strategy) {
  return strategy == LongTextStrategy::kHierMean || strategy == LongTextStrategy::kHierMax ||
         strategy == LongTextStrategy::kHierAttn;
}

TruncationStrategy TruncationStrategy::for_capacity(Kind kind, std::size_t capacity) {
  TruncationStrategy s;
  s.kind = kind;
  s.capacity = capacity;
  s.head_budget = static_cast<std::size_t>(std::llround(static_cast<double>(capacity) * 128.0 / 510.0));
  s.tail_budget = capacity - s.head_budget;
  return s;
}

void TruncationStrategy::validate() const {
  if (kind == Kind::kHeadTail && head_budget + tail_budget != capacity) {
    throw ConfigError("head budget " + std::to_string(head_budget) + " + tail budget " +
                      std::to_string(tail_budget) + " != capacity " + std::to_string(capacity));
  }
}

std::vector<int> truncate(std::span<const int> tokens, const TruncationStrategy& strategy) {
  strategy.validate();
  const std::size_t n = tokens.size();
  if (n <= strategy.capacity) return {tokens.begin(), tokens.end()};
  switch (strategy.kind) {
    case TruncationStrategy::Kind::kHeadOnly:
      return {tokens.begin(), tokens.begin() + strategy.capacity};
    case TruncationStrategy::Kind::kTailOnly:
      return {tokens.end() - strategy.capacity, tokens.end()};
    case TruncationStrategy::Kind::kHeadTail: {
      std::vector<int> out(tokens.begin(), tokens.begin() + strategy.head_budget);
      out.insert(out.end(), tokens.end() - strategy.tail_budget, tokens.end());
      return out;
    }
  }
  return {};
}

ChunkedDocument chunk(std::span<const int> tokens, std::size_t capacity) {
  if (capacity == 0) throw ConfigError("chunk capacity must be positive");
  ChunkedDocument doc;
  const std::size_t k = tokens.empty() ? 1 : (tokens.size() + capacity - 1) / capacity;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t begin = std::min(tokens.size(), i * capacity);
    const std::size_t end = std::min(tokens.size(), begin + capacity);
    doc.fractions.push_back(
        encode_segments(tokens.subspan(begin, end - begin), std::nullopt, capacity + 2));
  }
  return doc;
}

// ---------------------------------------------------------------------------

template <typename T>
FractionCombiner<T>::FractionCombiner(Kind kind) : kind_(kind) {
  if (kind == Kind::kSelfAttention) {
    throw ConfigError("self-attention combiner needs parameters; use the store constructor");
  }
}

template <typename T>
FractionCombiner<T>::FractionCombiner(ParameterStore<T>& store, const std::string& prefix,
                                      std::size_t hidden, Rng* rng, double init_std)
    : kind_(Kind::kSelfAttention) {
  auto random = [&](Shape shape) {
    Tensor<T> t(std::move(shape));
    if (rng) {
      for (auto& v : t.data()) v = static_cast<T>(rng->truncated_normal(init_std));
    }
    return t;
  };
  query_ = &store.add(prefix + ".query", random({1, hidden}));
  key_ = &store.add(prefix + ".key", random({hidden, hidden}));
  Tensor<T> identity({hidden, hidden});
  for (std::size_t i = 0; i < hidden; ++i) identity.at(i, i) = T{1};
  value_ = &store.add(prefix + ".value", std::move(identity));
}

template <typename T>
Var<T> FractionCombiner<T>::combine(Var<T> fractions, Tensor<T>* weights) const {
  if (fractions.rows() == 0) throw ShapeError("combine: no fractions");
  switch (kind_) {
    case Kind::kMean:
      return mean_rows(fractions);
    case Kind::kMax:
      return max_rows(fractions);
    case Kind::kSelfAttention:
      break;
  }
  Tape<T>& tape = *fractions.tape;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(fractions.cols()));
  const auto keys = matmul(fractions, tape.param(*key_));
  const auto scores = softmax(scale(matmul_nt(tape.param(*query_), keys), inv_sqrt));
  if (weights) *weights = scores.value();
  return matmul(scores, matmul(fractions, tape.param(*value_)));
}

template <typename T>
std::vector<Parameter<T>*> FractionCombiner<T>::parameters() const {
  if (kind_ != Kind::kSelfAttention) return {};
  return {query_, key_, value_};
}

template class FractionCombiner<float>;
template class FractionCombiner<double>;

}  // namespace ftbert
