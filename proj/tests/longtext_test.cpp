#include <doctest.h>

#include <numeric>

#include "ftbert/core/grad_check.hpp"
#include "ftbert/longtext/long_text.hpp"

using namespace ftbert;

namespace {

std::vector<int> iota_tokens(std::size_t n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

bool is_subsequence(const std::vector<int>& sub, const std::vector<int>& full) {
  std::size_t j = 0;
  for (int x : full) {
    if (j < sub.size() && sub[j] == x) ++j;
  }
  return j == sub.size();
}

}  // namespace

TEST_CASE("strategy names round trip") {
  for (const char* s : {"head_only", "tail_only", "head_tail", "hier_mean", "hier_max", "hier_attn"}) {
    CHECK(to_string(parse_long_text_strategy(s)) == s);
  }
  CHECK_THROWS_AS(parse_long_text_strategy("middle"), ConfigError);
  CHECK(is_hierarchical(LongTextStrategy::kHierAttn));
  CHECK_FALSE(is_hierarchical(LongTextStrategy::kHeadTail));
}

TEST_CASE("truncation examples") {
  TruncationStrategy head_tail;
  auto tokens = iota_tokens(600);
  auto out = truncate(tokens, head_tail);
  std::vector<int> expected(tokens.begin(), tokens.begin() + 128);
  expected.insert(expected.end(), tokens.begin() + 218, tokens.end());
  CHECK(out == expected);

  tokens = iota_tokens(510);
  for (auto kind : {TruncationStrategy::Kind::kHeadOnly, TruncationStrategy::Kind::kTailOnly,
                    TruncationStrategy::Kind::kHeadTail}) {
    TruncationStrategy s;
    s.kind = kind;
    CHECK(truncate(tokens, s) == tokens);
  }

  tokens = iota_tokens(511);
  out = truncate(tokens, head_tail);
  CHECK(out.size() == 510);
  CHECK(std::find(out.begin(), out.end(), 128) == out.end());
  for (int i = 0; i < 511; ++i) {
    if (i != 128) CHECK(std::find(out.begin(), out.end(), i) != out.end());
  }

  TruncationStrategy head;
  head.kind = TruncationStrategy::Kind::kHeadOnly;
  CHECK(truncate(iota_tokens(700), head) == iota_tokens(510));
  TruncationStrategy tail;
  tail.kind = TruncationStrategy::Kind::kTailOnly;
  CHECK(truncate(iota_tokens(700), tail).front() == 190);

  TruncationStrategy bad;
  bad.head_budget = 100;
  CHECK_THROWS_AS(truncate(tokens, bad), ConfigError);

  const auto small = TruncationStrategy::for_capacity(TruncationStrategy::Kind::kHeadTail, 126);
  CHECK(small.head_budget == 32);
  CHECK(small.tail_budget == 94);
  CHECK(TruncationStrategy::for_capacity(TruncationStrategy::Kind::kHeadTail, 510).head_budget == 128);
}

TEST_CASE("truncation sweep keeps order and capacity") {
  for (std::size_t n = 0; n <= 2000; n += 7) {
    const auto tokens = iota_tokens(n);
    for (auto kind : {TruncationStrategy::Kind::kHeadOnly, TruncationStrategy::Kind::kTailOnly,
                      TruncationStrategy::Kind::kHeadTail}) {
      TruncationStrategy s;
      s.kind = kind;
      const auto out = truncate(tokens, s);
      CHECK(out.size() == std::min<std::size_t>(n, 510));
      CHECK(is_subsequence(out, tokens));
    }
  }
}

TEST_CASE("chunking") {
  CHECK(chunk(iota_tokens(1020)).size() == 2);
  const auto c = chunk(iota_tokens(1021));
  REQUIRE(c.size() == 3);
  CHECK(content_ids(c.fractions[2]).size() == 1);
  CHECK(c.fractions[2].size() == 512);
  CHECK(chunk(iota_tokens(10)).size() == 1);
  const auto empty = chunk({});
  REQUIRE(empty.size() == 1);
  CHECK(content_ids(empty.fractions[0]).empty());
  CHECK(empty.fractions[0].token_ids[0] == 2);

  for (std::size_t n : {0, 1, 9, 10, 11, 55, 100}) {
    auto tokens = iota_tokens(n);
    for (auto& t : tokens) t += 5;
    const auto doc = chunk(tokens, 10);
    std::vector<int> flat;
    for (const auto& f : doc.fractions) {
      CHECK(f.size() == 12);
      CHECK(f.token_ids[0] == 2);
      const auto ids = content_ids(f);
      flat.insert(flat.end(), ids.begin(), ids.end());
    }
    CHECK(flat == tokens);
    CHECK(doc.size() == (n == 0 ? 1 : (n + 9) / 10));
  }
}

TEST_CASE("fraction combiners") {
  Tape<double> tape;
  const auto two = tape.constant(Tensor<double>::matrix(2, 2, {1, 3, 3, 1}));
  FractionCombiner<double> mean(FractionCombiner<double>::Kind::kMean);
  FractionCombiner<double> mx(FractionCombiner<double>::Kind::kMax);
  CHECK(mean.combine(two).value() == Tensor<double>({1, 2}, {2.0, 2.0}));
  CHECK(mx.combine(two).value() == Tensor<double>({1, 2}, {3.0, 3.0}));

  Rng rng(1);
  ParameterStore<double> store;
  FractionCombiner<double> attn(store, "combiner", 4, &rng);
  const auto one = tape.constant(Tensor<double>({1, 4}, {0.5, -1.0, 2.0, 0.25}));
  CHECK(mean.combine(one).value() == one.value());
  CHECK(mx.combine(one).value() == one.value());
  CHECK(attn.combine(one).value() == one.value());

  CHECK_THROWS_AS(FractionCombiner<double>(FractionCombiner<double>::Kind::kSelfAttention), ConfigError);

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng.uniform_int(6);
    Tensor<double> x({k, 4});
    for (auto& v : x.data()) v = rng.normal();
    Tensor<double> w;
    const auto out = attn.combine(tape.constant(x), &w);
    CHECK(out.shape() == Shape{1, 4});
    CHECK(w.shape() == Shape{1, k});
    double total = 0;
    for (double v : w.data()) total += v;
    CHECK(std::abs(total - 1.0) < 1e-6);

    // permutation invariance for mean/max
    Tensor<double> reversed({k, 4});
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < 4; ++j) reversed.at(k - 1 - i, j) = x.at(i, j);
    CHECK(max_rows(tape.constant(x)).value() == max_rows(tape.constant(reversed)).value());
    const auto m1 = mean.combine(tape.constant(x)).value();
    const auto m2 = mean.combine(tape.constant(reversed)).value();
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(m1[j] - m2[j]) < 1e-12);
  }
}

TEST_CASE("self-attention combiner gradients") {
  Rng rng(2);
  ParameterStore<double> store;
  FractionCombiner<double> attn(store, "combiner", 5, &rng, 0.5);
  Parameter<double> input("input", Tensor<double>({3, 5}));
  for (auto& v : input.value.data()) v = rng.normal();
  auto params = attn.parameters();
  params.push_back(&input);
  auto loss = [&](bool backward) {
    Tape<double> tape;
    const auto out = attn.combine(tape.param(input));
    const auto l = sum(mul(out, out));
    if (backward) tape.backward(l);
    return l.value().item();
  };
  for (auto* p : params) p->zero_grad();
  loss(true);
  GradCheckOptions opt;
  opt.step = 1e-5;
  CHECK(grad_check<double>([&] { return loss(false); }, params, opt).max_relative_error < 1e-6);
}
