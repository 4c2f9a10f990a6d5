#include <doctest.h>

#include <set>

#include "ftbert/multitask/multitask.hpp"
#include "support/toy.hpp"

using namespace ftbert;

namespace {

constexpr std::size_t kVocab = 30;

MultiTaskModel three_task_model(std::uint64_t seed) {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.vocab_size = kVocab;
  c.max_positions = 32;
  c.dropout = 0.0;
  Rng rng(seed);
  EncoderModel<float> enc(c, rng);
  return MultiTaskModel(std::move(enc), {{"order", 2}, {"majority", 3}, {"other", 2}}, LongTextStrategy::kHeadTail,
                        LayerSelection::top(), &rng);
}

std::vector<TaskData> three_task_data(std::uint64_t seed) {
  std::vector<TaskData> data(3);
  data[0].train = toy::marker_order_task(60, kVocab, 4, 12, seed);
  data[1].train = toy::majority_task(40, 3, kVocab, 10, seed + 1);
  data[2].train = toy::marker_order_task(20, kVocab, 4, 12, seed + 2);
  for (auto& e : data[2].train) e.label = 1 - e.label;
  return data;
}

TrainingRecipe recipe() {
  TrainingRecipe r;
  r.max_len = 32;
  r.base_lr = 1e-3;
  r.batch_size = 4;
  r.dropout = 0.0;
  r.seed = 2;
  return r;
}

std::vector<Tensor<float>> values(const std::vector<Parameter<float>*>& params) {
  std::vector<Tensor<float>> out;
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_CASE("task samplers") {
  TaskSampler prop(MixingKind::kProportional, {300, 100}, 5);
  std::size_t a = 0;
  for (int i = 0; i < 4000; ++i) a += prop.next() == 0;
  CHECK(std::abs(a / 4000.0 - 0.75) < 0.03);
  TaskSampler rr(MixingKind::kRoundRobin, {300, 100, 5}, 5);
  for (std::size_t i = 0; i < 9; ++i) CHECK(rr.next() == i % 3);
  CHECK(parse_mixing("round-robin") == MixingKind::kRoundRobin);
  CHECK_THROWS_AS(parse_mixing("random"), ConfigError);
}

TEST_CASE("encoder storage is shared and heads are private") {
  auto model = three_task_model(1);
  const auto a = model.trainable_parameters(0);
  const auto b = model.trainable_parameters(1);
  const auto backbone = model.encoder().backbone_parameters();
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    CHECK(a[i] == backbone[i]);
    CHECK(b[i] == backbone[i]);
  }
  for (auto* p : model.task_parameters(0))
    for (auto* q : model.task_parameters(1)) CHECK(p != q);
  CHECK(model.head(1).num_classes() == 3);
  CHECK(model.task_index("other") == 2);
  CHECK_THROWS_AS(model.task_index("missing"), ConfigError);
}

TEST_CASE("gradients of other heads are exactly zero") {
  auto model = three_task_model(2);
  for (auto* p : model.all_parameters()) p->zero_grad();
  const auto data = three_task_data(3);
  Tape<float> tape;
  const auto& ex = data[1].train[0];
  tape.backward(cross_entropy(model.logits(tape, 1, ex.tokens, recipe(), Mode::kEval, nullptr),
                              std::span<const int>(&ex.label, 1)));
  for (std::size_t t : {0, 2})
    for (auto* p : model.task_parameters(t))
      for (float g : p->grad.data()) REQUIRE(g == 0.0f);
  bool any = false;
  for (auto* p : model.task_parameters(1))
    for (float g : p->grad.data()) any |= g != 0.0f;
  CHECK(any);
}

TEST_CASE("a step on one task leaves other heads bitwise unchanged") {
  auto model = three_task_model(4);
  const auto data = three_task_data(5);
  auto r = recipe();
  const auto before = values(model.all_parameters());
  const auto probe = data[2].train[0].tokens;
  Tape<float> t0;
  const auto logits_before = model.logits(t0, 2, probe, r, Mode::kEval, nullptr).value();
  for (std::size_t steps = 1; steps <= 3; ++steps) {
    auto m = three_task_model(4);
    r.train_steps = steps;
    const auto res = multitask_finetune(m, data, r, MixingKind::kRoundRobin);
    CHECK(res.steps == steps);
    for (std::size_t t = 0; t < 3; ++t) {
      const bool trained = t < steps;
      const auto now = values(m.task_parameters(t));
      const auto orig = values(model.task_parameters(t));
      CHECK((now == orig) == !trained);
    }
    CHECK(values(m.encoder().backbone_parameters()) != values(model.encoder().backbone_parameters()));
    if (steps == 1) {
      // task 2's head is untouched but its predictions move with the encoder
      Tape<float> t1;
      CHECK_FALSE(m.logits(t1, 2, probe, r, Mode::kEval, nullptr).value() == logits_before);
    }
  }
  CHECK(values(model.all_parameters()) == before);
}

TEST_CASE("multitask run logs every task and validates inputs") {
  auto model = three_task_model(6);
  auto data = three_task_data(7);
  for (auto& d : data) d.validation = d.train;
  auto r = recipe();
  r.epochs = 1;
  MetricsLog log(true);
  const auto res = multitask_finetune(model, data, r, MixingKind::kProportional, &log);
  CHECK(res.steps == 30);
  std::size_t sum = 0;
  for (auto s : res.task_steps) sum += s;
  CHECK(sum == 30);
  std::set<std::string> tasks;
  for (const auto& rec : log.records())
    if (rec.split == "validation") tasks.insert(rec.task);
  CHECK(tasks == std::set<std::string>{"order", "majority", "other"});

  data[1].train.clear();
  CHECK_THROWS_AS(multitask_finetune(model, data, r, MixingKind::kProportional), ConfigError);
  data.pop_back();
  CHECK_THROWS_AS(multitask_finetune(model, data, r, MixingKind::kProportional), ConfigError);
}

TEST_CASE("checkpoint round trip keeps heads with their tasks") {
  auto model = three_task_model(8);
  const auto data = three_task_data(9);
  auto r = recipe();
  r.train_steps = 6;
  multitask_finetune(model, data, r, MixingKind::kRoundRobin);
  const auto ckpt = model.to_checkpoint("abc", 6);
  const auto bytes = ckpt.serialize();
  const auto loaded = MultiTaskModel::from_checkpoint(Checkpoint::parse(bytes));
  CHECK(loaded.to_checkpoint("abc", 6).serialize() == bytes);
  REQUIRE(loaded.num_tasks() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(loaded.task(t) == model.task(t));
    Tape<float> a, b;
    const auto& tokens = data[t].train[1].tokens;
    CHECK(loaded.logits(a, t, tokens, r, Mode::kEval, nullptr).value() ==
          model.logits(b, t, tokens, r, Mode::kEval, nullptr).value());
  }
  CHECK(ckpt.find("task.majority.classifier.weight")->shape() == Shape{16, 3});
}

TEST_CASE("per-task refinement") {
  auto model = three_task_model(10);
  const auto data = three_task_data(11);
  auto r = recipe();
  r.train_steps = 6;
  multitask_finetune(model, data, r, MixingKind::kRoundRobin);
  const auto ckpt = model.to_checkpoint("v", 6).serialize();

  auto zero = r;
  zero.train_steps = 0;
  CHECK(per_task_refine(model, 0, data[0], zero).steps == 0);
  CHECK(model.to_checkpoint("v", 6).serialize() == ckpt);

  const auto others1 = values(model.task_parameters(1));
  const auto others2 = values(model.task_parameters(2));
  const auto res = per_task_refine(model, 0, data[0], r);
  CHECK(res.steps == 6);
  CHECK(values(model.task_parameters(1)) == others1);
  CHECK(values(model.task_parameters(2)) == others2);
  CHECK(model.to_checkpoint("v", 6).serialize() != ckpt);
  CHECK_THROWS_AS(per_task_refine(model, 0, data[0], r, r.base_lr), ConfigError);
}

TEST_CASE("refinement does not hurt the refined task") {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    EncoderConfig c;
    c.num_layers = 2;
    c.hidden = 32;
    c.heads = 2;
    c.vocab_size = kVocab;
    c.max_positions = 32;
    c.dropout = 0.0;
    Rng rng(seed);
    EncoderModel<float> enc(c, rng);
    MultiTaskModel model(std::move(enc), {{"order", 2}, {"majority", 3}}, LongTextStrategy::kHeadTail,
                         LayerSelection::top(), &rng);
    std::vector<TaskData> data(2);
    data[0].train = toy::marker_order_task(300, kVocab, 6, 16, seed * 10);
    data[0].validation = toy::marker_order_task(100, kVocab, 6, 16, seed * 10 + 1);
    data[1].train = toy::majority_task(300, 3, kVocab, 12, seed * 10 + 2);
    const auto test = toy::marker_order_task(200, kVocab, 6, 16, seed * 10 + 3);
    auto r = recipe();
    r.batch_size = 8;
    r.epochs = 2;
    r.seed = seed;
    multitask_finetune(model, data, r, MixingKind::kProportional);
    const double joint = evaluate(model, 0, test, r).error_rate;
    per_task_refine(model, 0, data[0], r);
    const double refined = evaluate(model, 0, test, r).error_rate;
    MESSAGE("seed " << seed << ": multi-task " << joint << "% -> refined " << refined << "%");
    wins += refined <= joint;
  }
  CHECK(wins >= 2);
}
