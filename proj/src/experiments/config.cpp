#include "ftbert/experiments/config.hpp"

#include <fstream>
#include <set>

#include "ftbert/core/error.hpp"

namespace ftbert {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DataSpec parse_data(const json& j, const std::filesystem::path& base, const std::string& where) {
  check_keys(j, {"name", "train", "dataset_path", "test", "test_path", "format", "num_classes"}, where);
  DataSpec d;
  d.name = j.value("name", std::string{});
  const auto train = j.contains("train") ? j["train"] : j.value("dataset_path", json{});
  if (!train.is_string()) throw ConfigError(where + " needs a 'train' (or 'dataset_path') file");
  d.train = resolve(base, train.get<std::string>());
  const auto test = j.contains("test") ? j["test"] : j.value("test_path", json{});
  if (test.is_string()) d.test = resolve(base, test.get<std::string>());
  d.format = parse_dataset_format(j.value("format", std::string("csv-label-text")));
  d.num_classes = j.value("num_classes", std::size_t{2});
  if (d.name.empty()) d.name = d.train.stem().string();
  if (d.num_classes < 2) throw ConfigError(where + ": num_classes must be >= 2");
  return d;
}

json data_json(const DataSpec& d) {
  json j{{"name", d.name}, {"train", d.train.string()}, {"format", to_string(d.format)}, {"num_classes", d.num_classes}};
  if (!d.test.empty()) j["test"] = d.test.string();
  return j;
}

template <typename F>
auto guarded(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base) {
  check_keys(j,
             {"seed", "strict_deterministic", "output_dir", "model", "vocab", "vocab_size", "init_checkpoint", "data",
              "validation_fraction", "few_shot_fraction", "recipe", "pretrain", "multitask", "grid"},
             "config");
  for (const char* key : {"seed", "output_dir", "vocab", "data"}) {
    if (!j.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");
  }
  return guarded("config", [&] {
    ExperimentConfig c;
    c.seed = j["seed"].get<std::uint64_t>();
    c.strict_deterministic = j.value("strict_deterministic", false);
    c.output_dir = resolve(base, j["output_dir"].get<std::string>());
    if (j.contains("model")) c.model = EncoderConfig::from_json(j["model"]);
    c.vocab = resolve(base, j["vocab"].get<std::string>());
    c.vocab_size = j.value("vocab_size", c.model.vocab_size);
    if (j.contains("init_checkpoint") && !j["init_checkpoint"].is_null()) {
      c.init_checkpoint = resolve(base, j["init_checkpoint"].get<std::string>());
    }
    c.data = parse_data(j["data"], base, "data");
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.few_shot_fraction = j.value("few_shot_fraction", c.few_shot_fraction);
    if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
      throw ConfigError("validation_fraction must lie in (0, 1)");
    }
    if (!(c.few_shot_fraction > 0.0 && c.few_shot_fraction <= 1.0)) {
      throw ConfigError("few_shot_fraction must lie in (0, 1]");
    }
    json recipe = j.value("recipe", json::object());
    if (!recipe.contains("seed")) recipe["seed"] = c.seed;
    c.recipe = TrainingRecipe::from_json(recipe);

    if (j.contains("pretrain")) {
      const auto& p = j["pretrain"];
      check_keys(p,
                 {"scope", "datasets", "sources", "dedup_pairs", "language", "mask_prob", "steps", "checkpoint_every",
                  "batch_size", "max_len", "learning_rate", "warmup_proportion", "clip_norm", "seed"},
                 "pretrain");
      PretrainSpec s;
      s.scope.kind = PretrainScope::parse_kind(p.value("scope", std::string("within-task")));
      s.scope.datasets = p.value("datasets", std::vector<std::string>{c.data.name});
      if (p.contains("sources")) {
        for (const auto& src : p["sources"]) s.sources.push_back(parse_data(src, base, "pretrain.sources"));
      }
      for (const auto& pair : p.value("dedup_pairs", json::array())) {
        if (!pair.is_array() || pair.size() != 2) throw ConfigError("dedup_pairs entries must be [a, b]");
        s.dedup_pairs.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
      }
      const auto lang = p.value("language", std::string("english"));
      if (lang != "english" && lang != "chinese") throw ConfigError("language must be english or chinese");
      s.language = lang == "english" ? Language::kEnglish : Language::kChinese;
      s.train.masking.mask_prob = p.value("mask_prob", s.train.masking.mask_prob);
      s.train.steps = p.value("steps", s.train.steps);
      s.train.checkpoint_every = p.value("checkpoint_every", s.train.checkpoint_every);
      s.train.batch_size = p.value("batch_size", s.train.batch_size);
      s.train.max_len = p.value("max_len", s.train.max_len);
      s.train.learning_rate = p.value("learning_rate", s.train.learning_rate);
      s.train.warmup_proportion = p.value("warmup_proportion", s.train.warmup_proportion);
      s.train.clip_norm = p.value("clip_norm", s.train.clip_norm);
      s.train.seed = p.value("seed", c.seed);
      s.train.validate();
      s.scope.validate();
      c.pretrain = std::move(s);
    }
    if (j.contains("multitask")) {
      const auto& m = j["multitask"];
      check_keys(m, {"tasks", "mixing", "refine", "refine_lr"}, "multitask");
      MultitaskSpec s;
      for (const auto& t : m.at("tasks")) s.tasks.push_back(parse_data(t, base, "multitask.tasks"));
      if (s.tasks.size() < 2) throw ConfigError("multitask needs at least two tasks");
      s.mixing = parse_mixing(m.value("mixing", std::string("proportional")));
      s.refine = m.value("refine", true);
      if (m.contains("refine_lr") && !m["refine_lr"].is_null()) s.refine_lr = m["refine_lr"].get<double>();
      c.multitask = std::move(s);
    }
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      check_keys(g, {"learning_rates", "decay_factors", "sweep_learning_rates", "workers"}, "grid");
      c.grid.learning_rates = g.value("learning_rates", c.grid.learning_rates);
      c.grid.decay_factors = g.value("decay_factors", c.grid.decay_factors);
      c.grid.sweep_learning_rates = g.value("sweep_learning_rates", c.grid.sweep_learning_rates);
      c.grid.workers = std::max<std::size_t>(1, g.value("workers", std::size_t{1}));
      if (c.grid.learning_rates.empty() || c.grid.decay_factors.empty()) {
        throw ConfigError("grid lists must not be empty");
      }
    }
    return c;
  });
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return from_json(j, path.parent_path());
}

json ExperimentConfig::to_json() const {
  json j{{"seed", seed},
         {"strict_deterministic", strict_deterministic},
         {"output_dir", output_dir.string()},
         {"model", model.to_json()},
         {"vocab", vocab.string()},
         {"vocab_size", vocab_size},
         {"data", data_json(data)},
         {"validation_fraction", validation_fraction},
         {"few_shot_fraction", few_shot_fraction},
         {"recipe", recipe.to_json()},
         {"grid",
          {{"learning_rates", grid.learning_rates},
           {"decay_factors", grid.decay_factors},
           {"sweep_learning_rates", grid.sweep_learning_rates},
           {"workers", grid.workers}}}};
  if (init_checkpoint) j["init_checkpoint"] = init_checkpoint->string();
  if (pretrain) {
    const auto& p = *pretrain;
    json sources = json::array();
    for (const auto& s : p.sources) sources.push_back(data_json(s));
    json pairs = json::array();
    for (const auto& [a, b] : p.dedup_pairs) pairs.push_back({a, b});
    j["pretrain"] = {{"scope", to_string(p.scope.kind)},
                     {"datasets", p.scope.datasets},
                     {"sources", sources},
                     {"dedup_pairs", pairs},
                     {"language", p.language == Language::kEnglish ? "english" : "chinese"},
                     {"mask_prob", p.train.masking.mask_prob},
                     {"steps", p.train.steps},
                     {"checkpoint_every", p.train.checkpoint_every},
                     {"batch_size", p.train.batch_size},
                     {"max_len", p.train.max_len},
                     {"learning_rate", p.train.learning_rate},
                     {"warmup_proportion", p.train.warmup_proportion},
                     {"clip_norm", p.train.clip_norm},
                     {"seed", p.train.seed}};
  }
  if (multitask) {
    json tasks = json::array();
    for (const auto& t : multitask->tasks) tasks.push_back(data_json(t));
    j["multitask"] = {{"tasks", tasks}, {"mixing", to_string(multitask->mixing)}, {"refine", multitask->refine}};
    if (multitask->refine_lr) j["multitask"]["refine_lr"] = *multitask->refine_lr;
  }
  return j;
}

void ExperimentConfig::check_inputs(const std::string& command) const {
  auto need = [](const std::filesystem::path& p, const std::string& what) {
    if (p.empty() || !std::filesystem::exists(p)) {
      throw ConfigError(what + " '" + p.string() + "' does not exist");
    }
  };
  if (command != "build-vocab") need(vocab, "vocabulary");
  if (command == "multitask") {
    if (!multitask) throw ConfigError("config has no 'multitask' block");
    for (const auto& t : multitask->tasks) need(t.train, "task dataset");
    return;
  }
  need(data.train, "training data");
  if (command == "eval") need(data.test, "test data");
  if (init_checkpoint && command != "build-vocab") need(*init_checkpoint, "init checkpoint");
  if (command == "pretrain") {
    if (!pretrain) throw ConfigError("config has no 'pretrain' block");
    for (const auto& s : pretrain->sources) need(s.train, "pre-training source");
  }
}

}  // namespace ftbert
