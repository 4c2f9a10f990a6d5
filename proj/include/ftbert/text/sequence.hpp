#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ftbert {

/// Model input: [CLS] a... [SEP] (b... [SEP]) [PAD]...
struct TokenizedSequence {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<int> position_ids;
  std::vector<int> attention_mask;
  std::optional<int> label;

  std::size_t size() const { return token_ids.size(); }
  /// Number of non-padding positions (specials included).
  std::size_t unpadded_length() const;
};

/// Wraps one or two segments with [CLS]/[SEP] and pads to `max_len`.
/// Segment ids are 0 for [CLS] + a + first [SEP] and 1 for b + second [SEP].
/// Throws ConfigError if the segments plus specials exceed `max_len`;
/// truncation is the caller's job.
TokenizedSequence encode_segments(std::span<const int> seg_a,
                                  std::optional<std::span<const int>> seg_b, std::size_t max_len);

/// Ids of an encoded sequence without [CLS], [SEP] and padding.
std::vector<int> content_ids(const TokenizedSequence& seq);

}  // namespace ftbert
