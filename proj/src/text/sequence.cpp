#include "ftbert/text/sequence.hpp"

#include <algorithm>
#include <string>

#include "ftbert/core/error.hpp"
#include "ftbert/text/vocab.hpp"

namespace ftbert {

std::size_t TokenizedSequence::unpadded_length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

TokenizedSequence encode_segments(std::span<const int> seg_a,
                                  std::optional<std::span<const int>> seg_b, std::size_t max_len) {
  const std::size_t needed = seg_a.size() + 2 + (seg_b ? seg_b->size() + 1 : 0);
  if (needed > max_len) {
    throw ConfigError("sequence of " + std::to_string(needed) +
                      " tokens (with specials) exceeds max_len " + std::to_string(max_len));
  }
  TokenizedSequence seq;
  seq.token_ids.reserve(max_len);
  auto push = [&](int id, int segment) {
    seq.token_ids.push_back(id);
    seq.segment_ids.push_back(segment);
    seq.attention_mask.push_back(1);
  };
  push(Vocabulary::kCls, 0);
  for (int id : seg_a) push(id, 0);
  push(Vocabulary::kSep, 0);
  if (seg_b) {
    for (int id : *seg_b) push(id, 1);
    push(Vocabulary::kSep, 1);
  }
  while (seq.token_ids.size() < max_len) {
    seq.token_ids.push_back(Vocabulary::kPad);
    seq.segment_ids.push_back(0);
    seq.attention_mask.push_back(0);
  }
  seq.position_ids.resize(max_len);
  for (std::size_t i = 0; i < max_len; ++i) seq.position_ids[i] = static_cast<int>(i);
  return seq;
}

std::vector<int> content_ids(const TokenizedSequence& seq) {
  std::vector<int> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int id = seq.token_ids[i];
    if (seq.attention_mask[i] && id != Vocabulary::kCls && id != Vocabulary::kSep) {
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace ftbert
