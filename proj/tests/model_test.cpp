#include <doctest.h>

#include <cmath>

#include "ftbert/core/grad_check.hpp"
#include "ftbert/model/encoder.hpp"
#include "ftbert/model/heads.hpp"
#include "ftbert/model/layer_selection.hpp"
#include "ftbert/model/serialization.hpp"
#include "ftbert/text/vocab.hpp"

using namespace ftbert;

namespace {

EncoderConfig toy_config() {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden = 8;
  c.heads = 2;
  c.vocab_size = 30;
  c.max_positions = 16;
  c.dropout = 0.0;
  return c;
}

TokenizedSequence toy_sequence(std::size_t content, std::size_t max_len, Rng& rng,
                               std::size_t vocab = 30) {
  std::vector<int> a(content);
  for (auto& id : a) id = 5 + static_cast<int>(rng.uniform_int(vocab - 5));
  return encode_segments(a, std::nullopt, max_len);
}

template <typename T>
std::vector<Var<T>> constant_layers(Tape<T>& tape, const std::vector<std::vector<double>>& rows) {
  std::vector<Var<T>> out;
  for (const auto& r : rows) {
    Tensor<T> t({2, r.size()});
    for (std::size_t j = 0; j < r.size(); ++j) {
      t.at(0, j) = static_cast<T>(r[j]);
      t.at(1, j) = static_cast<T>(-7.0);
    }
    out.push_back(tape.constant(std::move(t)));
  }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = toy_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  c.num_layers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  CHECK(EncoderConfig::from_json(c.to_json()).ffn_size() == 32);
}

TEST_CASE("init is deterministic and matches the closed-form parameter count") {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden = 32;
  c.heads = 2;
  c.ffn = 128;
  c.vocab_size = 100;
  c.max_positions = 64;
  Rng r1(123), r2(123);
  EncoderModel<float> a(c, r1), b(c, r2);
  CHECK(encoder_checkpoint(a, "h", 0).serialize() == encoder_checkpoint(b, "h", 0).serialize());

  const std::size_t H = 32, F = 128, V = 100, P = 64, L = 2;
  const std::size_t embeddings = V * H + P * H + 2 * H + 2 * H;
  const std::size_t block = 4 * (H * H + H) + 2 * H + (H * F + F) + (F * H + H) + 2 * H;
  const std::size_t mlm = H * H + H + 2 * H + V;
  const std::size_t nsp = H * 2 + 2;
  CHECK(a.parameter_count() == embeddings + L * block + mlm + nsp);
  CHECK(a.parameter_count() == 32070);

  // init conventions
  CHECK(a.find("embeddings.norm.gain")->value == Tensor<float>({32}, 1.0f));
  CHECK(a.find("encoder.layer.1.ffn.in.bias")->value == Tensor<float>({128}, 0.0f));
  for (float v : a.find("embeddings.token")->value.data()) CHECK(std::abs(v) <= 0.04f);

  Rng r3(124);
  EncoderModel<float> other(c, r3);
  CHECK(other.find("embeddings.token")->value != a.find("embeddings.token")->value);
}

TEST_CASE("encoder checkpoint round trip") {
  Rng rng(1);
  EncoderModel<float> m(toy_config(), rng);
  const auto bytes = encoder_checkpoint(m, Vocabulary().hash(), 7).serialize();
  const auto ck = Checkpoint::parse(bytes);
  CHECK(ck.metadata.at("step") == 7);
  auto back = load_encoder(ck);
  CHECK(back.config() == m.config());
  CHECK(encoder_checkpoint(back, Vocabulary().hash(), 7).serialize() == bytes);
}

TEST_CASE("forward pass shape and determinism") {
  Rng rng(2);
  auto cfg = toy_config();
  EncoderModel<double> m(cfg, rng);
  const auto seq = toy_sequence(9, 16, rng);
  Tape<double> t1, t2;
  const auto o1 = m.encode(t1, seq, Mode::kEval);
  const auto o2 = m.encode(t2, seq, Mode::kEval);
  REQUIRE(o1.hidden.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(o1.hidden[l].shape() == Shape{16, 8});
    CHECK(o1.hidden[l].value() == o2.hidden[l].value());
  }
  // dropout = 0: training mode is deterministic without an rng
  Tape<double> t3;
  CHECK(m.encode(t3, seq, Mode::kTrain).top().value() == o1.top().value());

  auto long_seq = toy_sequence(20, 22, rng);
  Tape<double> t4;
  CHECK_THROWS_AS(m.encode(t4, long_seq, Mode::kEval), ConfigError);
}

TEST_CASE("dropout makes training passes stochastic but seeded") {
  Rng rng(3);
  auto cfg = toy_config();
  cfg.dropout = 0.1;
  EncoderModel<float> m(cfg, rng);
  const auto seq = toy_sequence(10, 16, rng);
  Tape<float> t1, t2, t3;
  Rng d1(5), d2(5), d3(6);
  const auto a = m.encode(t1, seq, Mode::kTrain, &d1).top().value();
  const auto b = m.encode(t2, seq, Mode::kTrain, &d2).top().value();
  const auto c = m.encode(t3, seq, Mode::kTrain, &d3).top().value();
  CHECK(a == b);
  CHECK(a != c);
  Tape<float> t4;
  CHECK_THROWS_AS(m.encode(t4, seq, Mode::kTrain), ConfigError);
}

TEST_CASE("padded positions do not influence unpadded outputs") {
  Rng rng(4);
  EncoderModel<double> m(toy_config(), rng);
  auto seq = toy_sequence(6, 16, rng);
  Tape<double> t1;
  const auto base = m.encode(t1, seq, Mode::kEval);
  for (int trial = 0; trial < 5; ++trial) {
    auto changed = seq;
    for (std::size_t i = 8; i < 16; ++i) changed.token_ids[i] = 5 + static_cast<int>(rng.uniform_int(25));
    Tape<double> t2;
    const auto out = m.encode(t2, changed, Mode::kEval);
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c)
          CHECK(out.hidden[l].value().at(r, c) == base.hidden[l].value().at(r, c));
  }
  // dropping the padding entirely gives bitwise-identical unpadded rows
  Tape<double> t3;
  EncodeOptions opt;
  opt.drop_padding = true;
  const auto trimmed = m.encode(t3, seq, Mode::kEval, nullptr, opt);
  CHECK(trimmed.top().shape() == Shape{8, 8});
  for (std::size_t i = 0; i < 64; ++i) CHECK(trimmed.top().value()[i] == base.top().value()[i]);
}

TEST_CASE("attention rows over unpadded keys sum to one") {
  Rng rng(6);
  EncoderModel<double> m(toy_config(), rng);
  const auto seq = toy_sequence(7, 16, rng);
  Tape<double> tape;
  EncodeOptions opt;
  opt.record_attention = true;
  const auto out = m.encode(tape, seq, Mode::kEval, nullptr, opt);
  REQUIRE(out.attention.size() == 2);
  for (const auto& layer : out.attention) {
    REQUIRE(layer.size() == 2);
    for (const auto& probs : layer) {
      for (std::size_t r = 0; r < 16; ++r) {
        double total = 0;
        for (std::size_t c = 0; c < 16; ++c) {
          if (seq.attention_mask[c]) total += probs.at(r, c);
          else CHECK(probs.at(r, c) == 0.0);
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("layer selection widths and parsing") {
  LayerSelection last4 = LayerSelection::parse("last4_concat");
  CHECK(last4.feature_width(12, 768) == 3072);
  CHECK(last4.layers(12) == std::vector<std::size_t>{9, 10, 11, 12});
  CHECK(LayerSelection::parse("first4_mean").layers(12) == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(LayerSelection::parse("all_max").feature_width(12, 768) == 768);
  CHECK(LayerSelection::parse("all_concat").feature_width(12, 768) == 12 * 768);
  CHECK(LayerSelection::parse("layer:0").layers(12) == std::vector<std::size_t>{0});
  CHECK(LayerSelection::top().layers(12) == std::vector<std::size_t>{12});
  CHECK(LayerSelection::parse("last4_concat").layers(2) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(LayerSelection::single(13).layers(12), ConfigError);
  CHECK_THROWS_AS(LayerSelection::parse("middle_concat"), ConfigError);
  for (const char* s : {"top", "layer:3", "first4_concat", "last4_mean", "all_max"}) {
    CHECK(LayerSelection::parse(s).to_string() == s);
  }

  Rng rng(7);
  auto cfg = toy_config();
  cfg.num_layers = 4;
  EncoderModel<double> m(cfg, rng);
  const auto seq = toy_sequence(5, 16, rng);
  Tape<double> tape;
  const auto out = m.encode(tape, seq, Mode::kEval);
  CHECK(select_features(out, LayerSelection::parse("last4_concat")).shape() == Shape{1, 32});
  CHECK(select_features(out, LayerSelection::parse("all_mean")).shape() == Shape{1, 8});
  CHECK(select_features(out, LayerSelection::single(0)).shape() == Shape{1, 8});
  CHECK(select_features(out, LayerSelection::single(0)).value() == row(out.hidden[0], 0).value());
}

TEST_CASE("select_features on constructed layer outputs") {
  Tape<double> tape;
  LayerOutputs<double> same;
  same.hidden = constant_layers(tape, {{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  const auto mean = select_features(same, LayerSelection::parse("last4_mean")).value();
  const auto mx = select_features(same, LayerSelection::parse("last4_max")).value();
  const auto single = select_features(same, LayerSelection::top()).value();
  CHECK(mean == single);
  CHECK(mx == single);

  LayerOutputs<double> dominated;
  dominated.hidden =
      constant_layers(tape, {{0, 0, 0}, {1, -2, 0.5}, {2, 1, -1}, {0, 3, 2}, {5, 4, 3}});
  CHECK(select_features(dominated, LayerSelection::parse("last4_max")).value() ==
        select_features(dominated, LayerSelection::top()).value());
  CHECK(select_features(dominated, LayerSelection::parse("last4_mean")).value() ==
        Tensor<double>({1, 3}, {2.0, 1.5, 1.125}));
}

TEST_CASE("classify") {
  ParameterStore<double> store;
  ClassifierHead<double> zero(store, "zero", 3, 4, nullptr);
  Tape<double> tape;
  const auto f = tape.constant(Tensor<double>({1, 3}, {0.3, -2.0, 7.0}));
  const auto p = classify(f, zero).value();
  for (double v : p.data()) CHECK(v == doctest::Approx(0.25));
  const std::vector<int> label = {2};
  CHECK(cross_entropy(zero.logits(f), std::span<const int>(label)).value().item() ==
        doctest::Approx(std::log(4.0)));

  ClassifierHead<double> ident(store, "ident", 2, 2, nullptr);
  ident.weight().value = Tensor<double>::matrix(2, 2, {1, 0, 0, 1});
  const auto q = classify(tape.constant(Tensor<double>({1, 2}, {1.0, 0.0})), ident).value();
  const double e = std::exp(1.0);
  CHECK(q[0] == doctest::Approx(e / (e + 1)));
  CHECK(q[1] == doctest::Approx(1 / (e + 1)));

  Rng rng(8);
  ClassifierHead<double> eye5(store, "eye5", 5, 5, nullptr);
  for (std::size_t i = 0; i < 5; ++i) eye5.weight().value.at(i, i) = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> x({1, 5});
    for (auto& v : x.data()) v = rng.normal();
    const double s = 0.1 + 10 * rng.uniform();
    auto scaled = x;
    for (auto& v : scaled.data()) v *= s;
    const auto probs = classify(tape.constant(scaled), eye5).value();
    const auto am = std::max_element(probs.data().begin(), probs.data().end()) - probs.data().begin();
    const auto ax = std::max_element(x.data().begin(), x.data().end()) - x.data().begin();
    CHECK(am == ax);
    double total = 0;
    for (double v : probs.data()) total += v;
    CHECK(std::abs(total - 1.0) < 1e-6);
  }

  CHECK_THROWS_AS(zero.logits(tape.constant(Tensor<double>({1, 5}))), ShapeError);
}

TEST_CASE("pre-training heads") {
  Rng rng(9);
  EncoderModel<double> m(toy_config(), rng);
  const auto seq = toy_sequence(5, 16, rng);
  Tape<double> tape;
  const auto out = m.encode(tape, seq, Mode::kEval);
  const auto mlm = m.mlm_logits(out.top());
  CHECK(mlm.shape() == Shape{16, 30});
  CHECK(m.nsp_logits(out.top()).shape() == Shape{1, 2});
  const std::vector<std::size_t> positions = {1, 3};
  const auto sub = m.mlm_logits(out.top(), positions);
  CHECK(sub.shape() == Shape{2, 30});
  for (std::size_t j = 0; j < 30; ++j) CHECK(sub.value().at(1, j) == mlm.value().at(3, j));

  // Tied projection: perturbing the embedding row of a token absent from the
  // input changes exactly that logit column.
  int absent = 5;
  while (std::find(seq.token_ids.begin(), seq.token_ids.end(), absent) != seq.token_ids.end()) ++absent;
  m.find("embeddings.token")->value.at(static_cast<std::size_t>(absent), 0) += 0.5;
  Tape<double> t2;
  const auto mlm2 = m.mlm_logits(m.encode(t2, seq, Mode::kEval).top());
  for (std::size_t r = 0; r < 16; ++r) {
    for (std::size_t j = 0; j < 30; ++j) {
      if (j == static_cast<std::size_t>(absent)) CHECK(mlm2.value().at(r, j) != mlm.value().at(r, j));
      else CHECK(mlm2.value().at(r, j) == mlm.value().at(r, j));
    }
  }
}

namespace {

// Classification + MLM + NSP loss touching every parameter.
template <typename T>
double full_loss(const EncoderModel<T>& model, const ClassifierHead<T>& head,
                 const TokenizedSequence& seq, const LayerSelection& sel, bool backward) {
  Tape<T> tape;
  const auto out = model.encode(tape, seq, Mode::kEval);
  const std::vector<int> label = {1};
  auto loss = cross_entropy(head.logits(select_features(out, sel)), std::span<const int>(label));
  const std::vector<std::size_t> positions = {2, 4, 5};
  const std::vector<int> targets = {7, 11, 19};
  loss = add(loss, cross_entropy(model.mlm_logits(out.top(), positions), std::span<const int>(targets)));
  const std::vector<int> is_next = {0};
  loss = add(loss, cross_entropy(model.nsp_logits(out.top()), std::span<const int>(is_next)));
  if (backward) tape.backward(loss);
  return static_cast<double>(loss.value().item());
}

}  // namespace

TEST_CASE("encoder gradients pass the finite-difference check") {
  Rng rng(10);
  auto cfg = toy_config();
  cfg.init_std = 0.5;  // larger weights exercise the non-linear regime
  for (const char* sel_name : {"top", "all_concat", "all_mean", "all_max"}) {
    const auto sel = LayerSelection::parse(sel_name);
    EncoderModel<double> m(cfg, rng);
    ParameterStore<double> heads;
    ClassifierHead<double> head(heads, "cls", sel.feature_width(2, 8), 3, &rng, 0.5);
    const auto seq = toy_sequence(10, 16, rng);
    auto params = m.parameters();
    for (auto* p : head.parameters()) params.push_back(p);
    for (auto* p : params) p->zero_grad();
    full_loss(m, head, seq, sel, true);
    GradCheckOptions opt;
    opt.step = 1e-5;
    const auto r = grad_check<double>([&] { return full_loss(m, head, seq, sel, false); }, params, opt);
    INFO(sel_name, " worst ", r.worst_parameter, "[", r.worst_index, "] a=", r.worst_analytic,
         " n=", r.worst_numeric);
    CHECK(r.max_relative_error < 1e-6);
  }
}

TEST_CASE("32-bit gradients agree with 64-bit finite differences") {
  Rng rng(11);
  auto cfg = toy_config();
  const auto sel = LayerSelection::top();
  EncoderModel<float> m32(cfg, rng);
  ParameterStore<float> heads32;
  ClassifierHead<float> head32(heads32, "cls", 8, 3, &rng, 0.5);
  EncoderModel<double> m64(cfg);
  ParameterStore<double> heads64;
  ClassifierHead<double> head64(heads64, "cls", 8, 3, nullptr);
  copy_parameter_values(m64.parameters(), m32.parameters());
  copy_parameter_values(head64.parameters(), head32.parameters());
  const auto seq = toy_sequence(10, 16, rng);

  auto p32 = m32.parameters();
  for (auto* p : head32.parameters()) p32.push_back(p);
  auto p64 = m64.parameters();
  for (auto* p : head64.parameters()) p64.push_back(p);
  for (auto* p : p32) p->zero_grad();
  full_loss(m32, head32, seq, sel, true);
  for (std::size_t i = 0; i < p32.size(); ++i) p64[i]->grad = p32[i]->grad.cast<double>();

  GradCheckOptions opt;
  opt.step = 1e-5;
  const auto r = grad_check<double>([&] { return full_loss(m64, head64, seq, sel, false); }, p64, opt);
  INFO("worst ", r.worst_parameter, "[", r.worst_index, "] a=", r.worst_analytic,
       " n=", r.worst_numeric);
  CHECK(r.max_relative_error < 1e-4);
}
