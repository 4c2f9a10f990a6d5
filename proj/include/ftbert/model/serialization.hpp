#pragma once

#include <string>
#include <vector>

#include "ftbert/core/checkpoint.hpp"
#include "ftbert/model/encoder.hpp"

namespace ftbert {

/// Appends every parameter value to `ckpt` under its own name.
void store_parameters(Checkpoint& ckpt, const std::vector<Parameter<float>*>& params);

/// Fills `params` from same-named tensors. Throws Error on a missing tensor or
/// shape mismatch.
void load_parameters(const Checkpoint& ckpt, const std::vector<Parameter<float>*>& params);

/// Metadata: {"model_config", "vocab_hash", "step"} followed by all encoder tensors.
Checkpoint encoder_checkpoint(const EncoderModel<float>& model, const std::string& vocab_hash,
                              std::size_t step);
EncoderModel<float> load_encoder(const Checkpoint& ckpt);

}  // namespace ftbert
