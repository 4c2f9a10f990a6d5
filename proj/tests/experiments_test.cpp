#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "ftbert/core/log.hpp"
#include "ftbert/experiments/training.hpp"
#include "support/toy.hpp"

using namespace ftbert;

namespace {

Dataset balanced(std::size_t per_class, std::size_t classes) {
  Dataset ds{"toy", classes, {}};
  for (std::size_t i = 0; i < per_class * classes; ++i) {
    ds.examples.push_back({static_cast<int>(i % classes), "text " + std::to_string(i)});
  }
  return ds;
}

EncoderConfig tiny_config(std::size_t vocab = 30) {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.vocab_size = vocab;
  c.max_positions = 32;
  c.dropout = 0.0;
  return c;
}

MultiTaskModel tiny_model(std::uint64_t seed, LongTextStrategy strategy = LongTextStrategy::kHeadTail,
                          LayerSelection sel = LayerSelection::top(), std::size_t vocab = 30) {
  Rng rng(seed);
  EncoderModel<float> enc(tiny_config(vocab), rng);
  return MultiTaskModel(std::move(enc), {{"task", 2}}, strategy, sel, &rng);
}

TrainingRecipe tiny_recipe() {
  TrainingRecipe r;
  r.max_len = 32;
  r.base_lr = 1e-3;
  r.batch_size = 8;
  r.dropout = 0.0;
  r.seed = 4;
  return r;
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto ds = parse_dataset("\"3\",\"good product\"\n", DatasetFormat::kLabelText, 5);
  REQUIRE(ds.size() == 1);
  CHECK(ds.examples[0].label == 2);
  CHECK(ds.examples[0].text == "good product");

  const auto tb = parse_dataset("1,\"Title here\",\"Body, with comma\"\n", DatasetFormat::kLabelTitleBody, 4);
  CHECK(tb.examples[0].text == "Title here Body, with comma");

  const auto tricky = parse_dataset(
      "\"1\",\"she said \"\"hi\"\"\"\r\n\"2\",\"line one\nline two\"\n2,plain\\nescaped\n", DatasetFormat::kLabelText,
      2);
  REQUIRE(tricky.size() == 3);
  CHECK(tricky.examples[0].text == "she said \"hi\"");
  CHECK(tricky.examples[1].text == "line one\nline two");
  CHECK(tricky.examples[2].text == "plain escaped");

  // record 2 spans two lines, so the bad label sits on line 5
  const std::string bad = "1,a\n2,\"b\nc\"\n1,d\n3,e\n";
  try {
    parse_dataset(bad, DatasetFormat::kLabelText, 2);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 5);
  }
  auto line_of = [](const std::string& csv, DatasetFormat f, std::size_t c) -> std::size_t {
    try {
      parse_dataset(csv, f, c);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("1,a\n1,b,c\n", DatasetFormat::kLabelText, 2) == 2);
  CHECK(line_of("1,a\nx,b\n", DatasetFormat::kLabelText, 2) == 2);
  CHECK(line_of("0,a\n", DatasetFormat::kLabelText, 2) == 1);
  CHECK(line_of("1,a\n2,\"  \"\n", DatasetFormat::kLabelText, 2) == 2);
  CHECK(line_of("1,\"open\n", DatasetFormat::kLabelText, 2) == 1);
  CHECK(line_of("1,\"a\"b\n", DatasetFormat::kLabelText, 2) == 1);
  CHECK(parse_dataset_format("csv-label-title-body") == DatasetFormat::kLabelTitleBody);
  CHECK_THROWS_AS(parse_dataset_format("tsv"), ConfigError);
}

TEST_CASE("ag-layout file class histogram") {
  const std::string csv =
      "\"3\",\"Wall St. Bears Claw Back\",\"Short-sellers are seeing green again.\"\n"
      "\"4\",\"New chip\",\"Faster processors, cheaper.\"\n"
      "\"1\",\"Talks resume\",\"Diplomats meet.\"\n"
      "\"2\",\"Cup final\",\"A late goal.\"\n"
      "\"3\",\"Oil prices\",\"Crude rises.\"\n"
      "\"3\",\"Stocks\",\"Markets close higher.\"\n"
      "\"2\",\"Olympics\",\"Gold again.\"\n"
      "\"4\",\"Space probe\",\"Launch delayed.\"\n";
  const auto path = std::filesystem::temp_directory_path() / "ftbert_ag_toy.csv";
  {
    std::ofstream out(path);
    out << csv;
  }
  const auto ds = load_dataset(path, DatasetFormat::kLabelTitleBody, 4);
  CHECK(ds.name == "ftbert_ag_toy");
  CHECK(ds.class_counts() == std::vector<std::size_t>{1, 2, 3, 2});
  CHECK(ds.examples[0].text == "Wall St. Bears Claw Back Short-sellers are seeing green again.");

  save_dataset(ds, path);
  const auto again = load_dataset(path, DatasetFormat::kLabelText, 4);
  REQUIRE(again.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(again.examples[i].label == ds.examples[i].label);
    CHECK(again.examples[i].text == ds.examples[i].text);
  }
  std::filesystem::remove(path);
}

TEST_CASE("stratified validation split") {
  const auto ds = balanced(50, 2);
  const auto [train, val] = split_validation(ds, 0.1, 7);
  CHECK(train.size() == 90);
  CHECK(val.size() == 10);
  const auto [train2, val2] = split_validation(ds, 0.1, 7);
  for (std::size_t i = 0; i < val.size(); ++i) CHECK(val.examples[i].text == val2.examples[i].text);

  std::multiset<std::string> all;
  for (const auto& e : train.examples) all.insert(e.text);
  for (const auto& e : val.examples) all.insert(e.text);
  std::multiset<std::string> expected;
  for (const auto& e : ds.examples) expected.insert(e.text);
  CHECK(all == expected);

  // unbalanced classes: per-class validation share within one example
  Dataset skewed{"skewed", 3, {}};
  for (int i = 0; i < 97; ++i) skewed.examples.push_back({i < 61 ? 0 : (i < 88 ? 1 : 2), std::to_string(i)});
  for (double f : {0.1, 0.25, 0.33}) {
    const auto [tr, va] = split_validation(skewed, f, 3);
    CHECK(va.size() == static_cast<std::size_t>(std::llround(f * 97)));
    const auto counts = va.class_counts();
    const auto sizes = skewed.class_counts();
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(static_cast<double>(counts[c]) - f * sizes[c]) <= 1.0);
  }

  Dataset tiny{"tiny", 2, {{0, "a"}, {0, "b"}, {1, "c"}}};
  CHECK_THROWS_AS(split_validation(tiny, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(split_validation(ds, 1.0, 1), ConfigError);
}

TEST_CASE("few-shot subsampling") {
  const auto ds = balanced(12500, 2);
  CHECK(subsample(ds, 1.0, 3).size() == ds.size());
  const auto few = subsample(ds, 0.004, 3);
  CHECK(few.size() == 100);
  CHECK(few.class_counts() == std::vector<std::size_t>{50, 50});

  const auto a = subsample(ds, 0.01, 9), b = subsample(ds, 0.1, 9), c = subsample(ds, 1.0, 9);
  CHECK(a.size() < b.size());
  CHECK(b.size() < c.size());
  std::set<std::string> bset;
  for (const auto& e : b.examples) bset.insert(e.text);
  for (const auto& e : a.examples) CHECK(bset.count(e.text) == 1);

  Dataset skewed{"s", 3, {}};
  for (int i = 0; i < 200; ++i) skewed.examples.push_back({i < 190 ? 0 : (i < 198 ? 1 : 2), std::to_string(i)});
  set_log_level(LogLevel::kError);
  const auto s = subsample(skewed, 0.01, 1);
  set_log_level(LogLevel::kInfo);
  CHECK(s.class_counts() == std::vector<std::size_t>{2, 1, 1});
  CHECK_THROWS_AS(subsample(ds, 0.0, 1), ConfigError);
}

TEST_CASE("stratified counts use largest remainders") {
  CHECK(stratified_counts({5, 5, 5}, 0.5) == std::vector<std::size_t>{3, 3, 2});
  CHECK(stratified_counts({10, 20}, 0.1) == std::vector<std::size_t>{1, 2});
  CHECK(stratified_counts({7, 3}, 1.0) == std::vector<std::size_t>{7, 3});
}

TEST_CASE("evaluation") {
  auto model = tiny_model(1);
  const auto recipe = tiny_recipe();
  auto& head = const_cast<ClassifierHead<float>&>(model.head(0));
  head.weight().value.fill(0.0f);
  head.bias().value = Tensor<float>({2}, {1.0f, 0.0f});

  auto examples = toy::marker_order_task(40, 30, 4, 10, 5);
  for (std::size_t i = 0; i < examples.size(); ++i) examples[i].label = static_cast<int>(i % 2);
  std::vector<int> predictions;
  const auto constant = evaluate(model, 0, examples, recipe, &predictions);
  CHECK(constant.error_rate == 50.0);
  CHECK(std::all_of(predictions.begin(), predictions.end(), [](int p) { return p == 0; }));

  for (auto& e : examples) e.label = 0;
  CHECK(evaluate(model, 0, examples, recipe).error_rate == 0.0);

  auto trained = tiny_model(2);
  auto data = toy::marker_order_task(64, 30, 4, 12, 6);
  auto r = tiny_recipe();
  r.epochs = 1;
  finetune(trained, 0, {data, {}, {}}, r);
  const auto test = toy::marker_order_task(50, 30, 4, 12, 7);
  const auto rec = evaluate(trained, 0, test, r, &predictions);
  // confusion-matrix recount
  std::size_t confusion[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < test.size(); ++i) ++confusion[test[i].label][predictions[i]];
  const double error = 100.0 * static_cast<double>(confusion[0][1] + confusion[1][0]) / test.size();
  CHECK(rec.error_rate == error);

  auto reversed = test;
  std::reverse(reversed.begin(), reversed.end());
  const auto rev = evaluate(trained, 0, reversed, r);
  CHECK(rev.loss == rec.loss);
  CHECK(rev.error_rate == rec.error_rate);
}

TEST_CASE("fine-tuning is deterministic and keeps the best epoch") {
  const auto train = toy::marker_order_task(80, 30, 4, 12, 8);
  const auto val = toy::marker_order_task(30, 30, 4, 12, 9);
  auto recipe = tiny_recipe();
  recipe.dropout = 0.1;
  MetricsLog log1(true), log2(true);
  auto m1 = tiny_model(3), m2 = tiny_model(3);
  const auto r1 = finetune(m1, 0, {train, val, val}, recipe, &log1);
  const auto r2 = finetune(m2, 0, {train, val, val}, recipe, &log2);
  REQUIRE(r1.records.size() == r2.records.size());
  for (std::size_t i = 0; i < r1.records.size(); ++i) {
    CHECK(r1.records[i].to_json().dump() == r2.records[i].to_json().dump());
    CHECK(r1.records[i].wall_clock == 0.0);
  }
  const auto p1 = m1.all_parameters(), p2 = m2.all_parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value == p2[i]->value);

  CHECK(r1.steps == 4 * 10);
  std::vector<double> val_errors;
  for (const auto& r : r1.records)
    if (r.split == "validation") val_errors.push_back(r.error_rate);
  REQUIRE(val_errors.size() == 4);
  const auto best = std::min_element(val_errors.begin(), val_errors.end());
  CHECK(r1.best_epoch == static_cast<std::size_t>(best - val_errors.begin()) + 1);
  CHECK(r1.best_validation_error == *best);
  CHECK(evaluate(m1, 0, val, recipe).error_rate == *best);

  recipe.train_steps = 15;
  auto m3 = tiny_model(3);
  CHECK(finetune(m3, 0, {train, val, {}}, recipe).steps == 15);
}

TEST_CASE("divergence surfaces as NumericError") {
  const auto train = toy::marker_order_task(40, 30, 4, 12, 8);
  auto recipe = tiny_recipe();
  recipe.base_lr = 1e30;
  auto m = tiny_model(3);
  CHECK_THROWS_AS(finetune(m, 0, {train, {}, {}}, recipe), NumericError);
}

TEST_CASE("every long-text strategy and layer selection trains") {
  const auto train = toy::marker_order_task(16, 30, 20, 70, 10);
  for (const auto s : {LongTextStrategy::kHeadOnly, LongTextStrategy::kTailOnly, LongTextStrategy::kHeadTail,
                       LongTextStrategy::kHierMean, LongTextStrategy::kHierMax, LongTextStrategy::kHierAttn}) {
    for (const auto& sel : {"top", "all_concat", "last4_mean"}) {
      auto recipe = tiny_recipe();
      recipe.long_text = s;
      recipe.selection = LayerSelection::parse(sel);
      recipe.epochs = 1;
      recipe.max_fractions = 3;
      auto m = tiny_model(5, s, recipe.selection);
      const auto before = m.task_parameters(0).front()->value;
      const auto res = finetune(m, 0, {train, {}, {}}, recipe);
      CHECK(res.steps == 2);
      CHECK_FALSE(m.task_parameters(0).front()->value == before);
      if (s == LongTextStrategy::kHierAttn) CHECK(m.task_parameters(0).size() == 5);
      if (is_hierarchical(s)) CHECK(m.feature_width() == 16);
    }
  }
  auto m = tiny_model(5);
  auto recipe = tiny_recipe();
  recipe.long_text = LongTextStrategy::kHierMean;
  CHECK_THROWS_AS(finetune(m, 0, {train, {}, {}}, recipe), ConfigError);
}

TEST_CASE("recipe and metrics serialisation") {
  auto r = tiny_recipe();
  r.train_steps = 123;
  r.selection = LayerSelection::parse("last4_concat");
  r.long_text = LongTextStrategy::kHierAttn;
  const auto back = TrainingRecipe::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  CHECK_THROWS_AS(TrainingRecipe::from_json({{"base_rate", 1.0}}), ConfigError);
  CHECK_THROWS_AS(TrainingRecipe::from_json({{"decay_factor", 1.5}}), ConfigError);
  CHECK(TrainingRecipe::from_json(nlohmann::json::object()).decay_factor == 1.0);

  const auto path = std::filesystem::temp_directory_path() / "ftbert_metrics.jsonl";
  {
    MetricsLog log(path, true);
    MetricsRecord m;
    m.step = 3;
    m.split = "test";
    m.error_rate = 12.5;
    log.add(m);
  }
  const auto records = read_metrics(path);
  REQUIRE(records.size() == 1);
  CHECK(records[0].error_rate == 12.5);
  CHECK(records[0].wall_clock == 0.0);
  std::filesystem::remove(path);
}
