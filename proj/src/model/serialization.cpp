#include "ftbert/model/serialization.hpp"

namespace ftbert {

void store_parameters(Checkpoint& ckpt, const std::vector<Parameter<float>*>& params) {
  for (const auto* p : params) ckpt.add(p->name, p->value);
}

void load_parameters(const Checkpoint& ckpt, const std::vector<Parameter<float>*>& params) {
  for (auto* p : params) {
    const Tensor<float>* t = ckpt.find(p->name);
    if (!t) throw Error("checkpoint lacks tensor '" + p->name + "'");
    if (t->shape() != p->value.shape()) {
      throw Error("checkpoint tensor '" + p->name + "' has shape " + shape_string(t->shape()) +
                  ", model expects " + shape_string(p->value.shape()));
    }
    p->value = *t;
  }
}

Checkpoint encoder_checkpoint(const EncoderModel<float>& model, const std::string& vocab_hash,
                              std::size_t step) {
  Checkpoint ckpt;
  ckpt.metadata = {{"model_config", model.config().to_json()},
                   {"vocab_hash", vocab_hash},
                   {"step", step}};
  store_parameters(ckpt, model.parameters());
  return ckpt;
}

EncoderModel<float> load_encoder(const Checkpoint& ckpt) {
  EncoderModel<float> model(EncoderConfig::from_json(ckpt.metadata.at("model_config")));
  load_parameters(ckpt, model.parameters());
  return model;
}

}  // namespace ftbert
