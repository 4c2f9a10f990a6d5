#include "ftbert/model/layer_selection.hpp"

#include <algorithm>

namespace ftbert {

std::vector<std::size_t> LayerSelection::layers(std::size_t num_layers) const {
  std::vector<std::size_t> out;
  const auto top_index = static_cast<int>(num_layers);
  switch (strategy) {
    case Strategy::kSingle: {
      const int l = layer < 0 ? top_index + 1 + layer : layer;
      if (l < 0 || l > top_index) {
        throw ConfigError("layer " + std::to_string(layer) + " outside [0, " +
                          std::to_string(num_layers) + "]");
      }
      out.push_back(static_cast<std::size_t>(l));
      break;
    }
    case Strategy::kFirst4:
      for (std::size_t l = 1; l <= std::min<std::size_t>(4, num_layers); ++l) out.push_back(l);
      break;
    case Strategy::kLast4:
      for (std::size_t l = num_layers > 4 ? num_layers - 3 : 1; l <= num_layers; ++l) out.push_back(l);
      break;
    case Strategy::kAll:
      for (std::size_t l = 1; l <= num_layers; ++l) out.push_back(l);
      break;
  }
  return out;
}

std::size_t LayerSelection::feature_width(std::size_t num_layers, std::size_t hidden) const {
  if (strategy == Strategy::kSingle || combiner != Combiner::kConcat) return hidden;
  return layers(num_layers).size() * hidden;
}

LayerSelection LayerSelection::parse(std::string_view text) {
  if (text == "top") return top();
  if (text.rfind("layer:", 0) == 0) {
    try {
      return single(std::stoi(std::string(text.substr(6))));
    } catch (const std::exception&) {
      throw ConfigError("bad layer index in '" + std::string(text) + "'");
    }
  }
  const auto us = text.find('_');
  if (us == std::string_view::npos) throw ConfigError("unknown layer selection '" + std::string(text) + "'");
  const auto s = text.substr(0, us);
  const auto c = text.substr(us + 1);
  LayerSelection sel;
  if (s == "first4") sel.strategy = Strategy::kFirst4;
  else if (s == "last4") sel.strategy = Strategy::kLast4;
  else if (s == "all") sel.strategy = Strategy::kAll;
  else throw ConfigError("unknown layer strategy '" + std::string(s) + "'");
  if (c == "concat") sel.combiner = Combiner::kConcat;
  else if (c == "mean") sel.combiner = Combiner::kMean;
  else if (c == "max") sel.combiner = Combiner::kMax;
  else throw ConfigError("unknown layer combiner '" + std::string(c) + "'");
  return sel;
}

std::string LayerSelection::to_string() const {
  if (strategy == Strategy::kSingle) return layer == -1 ? "top" : "layer:" + std::to_string(layer);
  std::string s = strategy == Strategy::kFirst4 ? "first4" : strategy == Strategy::kLast4 ? "last4" : "all";
  s += combiner == Combiner::kConcat ? "_concat" : combiner == Combiner::kMean ? "_mean" : "_max";
  return s;
}

template <typename T>
Var<T> select_features(const LayerOutputs<T>& outputs, const LayerSelection& selection) {
  const std::size_t num_layers = outputs.hidden.size() - 1;
  std::vector<Var<T>> cls;
  for (std::size_t l : selection.layers(num_layers)) cls.push_back(row(outputs.hidden[l], 0));
  if (cls.size() == 1) return cls[0];
  switch (selection.combiner) {
    case LayerSelection::Combiner::kConcat:
      return concat_cols(cls);
    case LayerSelection::Combiner::kMean:
      return mean_rows(concat_rows(cls));
    case LayerSelection::Combiner::kMax:
      return max_rows(concat_rows(cls));
  }
  return cls[0];
}

template Var<float> select_features(const LayerOutputs<float>&, const LayerSelection&);
template Var<double> select_features(const LayerOutputs<double>&, const LayerSelection&);

}  // namespace ftbert
