#include "ftbert/multitask/model.hpp"

#include <set>

#include "ftbert/core/error.hpp"
#include "ftbert/model/serialization.hpp"

namespace ftbert {

namespace {

FractionCombiner<float>::Kind combiner_kind(LongTextStrategy s) {
  switch (s) {
    case LongTextStrategy::kHierMean: return FractionCombiner<float>::Kind::kMean;
    case LongTextStrategy::kHierMax: return FractionCombiner<float>::Kind::kMax;
    default: return FractionCombiner<float>::Kind::kSelfAttention;
  }
}

TruncationStrategy::Kind truncation_kind(LongTextStrategy s) {
  switch (s) {
    case LongTextStrategy::kHeadOnly: return TruncationStrategy::Kind::kHeadOnly;
    case LongTextStrategy::kTailOnly: return TruncationStrategy::Kind::kTailOnly;
    default: return TruncationStrategy::Kind::kHeadTail;
  }
}

}  // namespace

MultiTaskModel::MultiTaskModel(EncoderModel<float> encoder, std::vector<TaskSpec> tasks, LongTextStrategy long_text,
                               LayerSelection selection, Rng* rng)
    : encoder_(std::move(encoder)),
      tasks_(std::move(tasks)),
      long_text_(long_text),
      selection_(selection),
      store_(std::make_unique<ParameterStore<float>>()) {
  if (tasks_.empty()) throw ConfigError("a model needs at least one task");
  std::set<std::string> names;
  for (const auto& t : tasks_) {
    if (t.name.empty() || !names.insert(t.name).second) throw ConfigError("task names must be unique and non-empty");
    if (t.num_classes < 2) throw ConfigError("task '" + t.name + "' needs at least two classes");
  }
  const auto width = feature_width();
  const auto hidden = encoder_.config().hidden;
  for (const auto& t : tasks_) {
    const std::string prefix = "task." + t.name;
    TaskHead th{ClassifierHead<float>(*store_, prefix + ".classifier", width, t.num_classes, rng), nullptr};
    if (is_hierarchical(long_text_)) {
      const auto kind = combiner_kind(long_text_);
      th.combiner = kind == FractionCombiner<float>::Kind::kSelfAttention
                        ? std::make_unique<FractionCombiner<float>>(*store_, prefix + ".combiner", hidden, rng)
                        : std::make_unique<FractionCombiner<float>>(kind);
    }
    heads_.push_back(std::move(th));
  }
}

std::size_t MultiTaskModel::feature_width() const {
  const auto& c = encoder_.config();
  return is_hierarchical(long_text_) ? c.hidden : selection_.feature_width(c.num_layers, c.hidden);
}

std::size_t MultiTaskModel::task_index(const std::string& name) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].name == name) return i;
  }
  throw ConfigError("unknown task '" + name + "'");
}

std::vector<Parameter<float>*> MultiTaskModel::task_parameters(std::size_t i) const {
  const auto& th = heads_.at(i);
  auto params = th.head.parameters();
  if (th.combiner) {
    for (auto* p : th.combiner->parameters()) params.push_back(p);
  }
  return params;
}

std::vector<Parameter<float>*> MultiTaskModel::trainable_parameters(std::size_t i) const {
  auto params = encoder_.backbone_parameters();
  for (auto* p : task_parameters(i)) params.push_back(p);
  return params;
}

std::vector<Parameter<float>*> MultiTaskModel::all_parameters() const {
  auto params = encoder_.parameters();
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    for (auto* p : task_parameters(i)) params.push_back(p);
  }
  return params;
}

Var<float> MultiTaskModel::features(Tape<float>& tape, std::size_t task, std::span<const int> tokens,
                                    const TrainingRecipe& recipe, Mode mode, Rng* dropout_rng) const {
  if (recipe.long_text != long_text_) {
    throw ConfigError("recipe long-text strategy " + to_string(recipe.long_text) + " differs from the model's " +
                      to_string(long_text_));
  }
  EncodeOptions opts;
  opts.drop_padding = true;
  if (!is_hierarchical(long_text_)) {
    if (!(recipe.selection == selection_)) {
      throw ConfigError("recipe layer selection " + recipe.selection.to_string() + " differs from the model's " +
                        selection_.to_string());
    }
    const auto kept = truncate(tokens, TruncationStrategy::for_capacity(truncation_kind(long_text_), recipe.capacity()));
    const auto seq = encode_segments(kept, std::nullopt, recipe.max_len);
    return select_features(encoder_.encode(tape, seq, mode, dropout_rng, opts), selection_);
  }
  auto doc = chunk(tokens, recipe.capacity());
  if (recipe.max_fractions > 0 && doc.fractions.size() > recipe.max_fractions) {
    doc.fractions.resize(recipe.max_fractions);
  }
  std::vector<Var<float>> cls;
  cls.reserve(doc.fractions.size());
  for (const auto& f : doc.fractions) cls.push_back(row(encoder_.encode(tape, f, mode, dropout_rng, opts).top(), 0));
  return heads_.at(task).combiner->combine(cls.size() == 1 ? cls.front() : concat_rows(cls));
}

Var<float> MultiTaskModel::logits(Tape<float>& tape, std::size_t task, std::span<const int> tokens,
                                  const TrainingRecipe& recipe, Mode mode, Rng* dropout_rng) const {
  return heads_.at(task).head.logits(features(tape, task, tokens, recipe, mode, dropout_rng));
}

Checkpoint MultiTaskModel::to_checkpoint(const std::string& vocab_hash, std::size_t step) const {
  Checkpoint ckpt = encoder_checkpoint(encoder_, vocab_hash, step);
  ckpt.metadata["long_text"] = to_string(long_text_);
  ckpt.metadata["layer_selection"] = selection_.to_string();
  auto tasks = nlohmann::json::array();
  for (const auto& t : tasks_) tasks.push_back({{"name", t.name}, {"num_classes", t.num_classes}});
  ckpt.metadata["tasks"] = tasks;
  std::vector<Parameter<float>*> task_params;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    for (auto* p : task_parameters(i)) task_params.push_back(p);
  }
  store_parameters(ckpt, task_params);
  return ckpt;
}

MultiTaskModel MultiTaskModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto& meta = ckpt.metadata;
  if (!meta.contains("tasks") || !meta.contains("long_text") || !meta.contains("layer_selection")) {
    throw Error("checkpoint has no task heads");
  }
  std::vector<TaskSpec> tasks;
  for (const auto& t : meta["tasks"]) tasks.push_back({t.at("name").get<std::string>(), t.at("num_classes").get<std::size_t>()});
  MultiTaskModel model(load_encoder(ckpt), std::move(tasks),
                       parse_long_text_strategy(meta["long_text"].get<std::string>()),
                       LayerSelection::parse(meta["layer_selection"].get<std::string>()), nullptr);
  std::vector<Parameter<float>*> task_params;
  for (std::size_t i = 0; i < model.num_tasks(); ++i) {
    for (auto* p : model.task_parameters(i)) task_params.push_back(p);
  }
  load_parameters(ckpt, task_params);
  return model;
}

}  // namespace ftbert
