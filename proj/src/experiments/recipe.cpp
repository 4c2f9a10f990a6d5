#include "ftbert/experiments/recipe.hpp"

#include <set>
#include <string>

#include "ftbert/core/error.hpp"
#include "ftbert/optim/schedule.hpp"

namespace ftbert {

void TrainingRecipe::validate() const {
  if (max_len < 3) throw ConfigError("max_len must be at least 3");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  LayerwiseLrSchedule{base_lr, decay_factor, 1}.validate();
  if (!(warmup_proportion > 0.0 && warmup_proportion < 1.0)) {
    throw ConfigError("warmup_proportion must lie in (0, 1)");
  }
}

nlohmann::json TrainingRecipe::to_json() const {
  nlohmann::json j{{"long_text", to_string(long_text)},
                   {"max_len", max_len},
                   {"max_fractions", max_fractions},
                   {"layer_selection", selection.to_string()},
                   {"base_lr", base_lr},
                   {"decay_factor", decay_factor},
                   {"warmup_proportion", warmup_proportion},
                   {"epochs", epochs},
                   {"batch_size", batch_size},
                   {"dropout", dropout},
                   {"clip_norm", clip_norm},
                   {"seed", seed}};
  if (train_steps) j["train_steps"] = *train_steps;
  return j;
}

TrainingRecipe TrainingRecipe::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"long_text", "max_len",    "max_fractions", "layer_selection",
                                           "base_lr",   "decay_factor", "warmup_proportion", "epochs",
                                           "train_steps", "batch_size", "dropout",     "clip_norm", "seed"};
  if (!j.is_object()) throw ConfigError("recipe must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown recipe key '" + key + "'");
  }
  TrainingRecipe r;
  try {
    if (j.contains("long_text")) r.long_text = parse_long_text_strategy(j["long_text"].get<std::string>());
    if (j.contains("max_len")) r.max_len = j["max_len"].get<std::size_t>();
    if (j.contains("max_fractions")) r.max_fractions = j["max_fractions"].get<std::size_t>();
    if (j.contains("layer_selection")) r.selection = LayerSelection::parse(j["layer_selection"].get<std::string>());
    if (j.contains("base_lr")) r.base_lr = j["base_lr"].get<double>();
    if (j.contains("decay_factor")) r.decay_factor = j["decay_factor"].get<double>();
    if (j.contains("warmup_proportion")) r.warmup_proportion = j["warmup_proportion"].get<double>();
    if (j.contains("epochs")) r.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("train_steps") && !j["train_steps"].is_null()) r.train_steps = j["train_steps"].get<std::size_t>();
    if (j.contains("batch_size")) r.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("dropout")) r.dropout = j["dropout"].get<double>();
    if (j.contains("clip_norm")) r.clip_norm = j["clip_norm"].get<double>();
    if (j.contains("seed")) r.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("recipe: ") + e.what());
  }
  r.validate();
  return r;
}

}  // namespace ftbert
