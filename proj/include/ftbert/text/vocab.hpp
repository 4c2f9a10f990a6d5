#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ftbert {

/// WordPiece vocabulary. Ids are dense in [0, size); the five reserved tokens
/// occupy ids 0..4. Word-initial pieces are stored bare, continuation pieces
/// with a "##" prefix. Immutable once built.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumReserved = 5;
  static constexpr std::array<std::string_view, kNumReserved> kReserved = {
      "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

  Vocabulary();
  /// Throws ConfigError unless tokens start with the reserved set and are unique.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::optional<int> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  /// Id of `token`, or [UNK].
  int id(std::string_view token) const { return find(token).value_or(kUnk); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static bool is_special(int id) { return id >= 0 && id < kNumReserved; }

  /// One token per line, line number = id, UTF-8, trailing newline.
  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  /// FNV-1a hash of `to_text()`, used to tie checkpoints to their vocabulary.
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Builds a vocabulary by iterative pair merging over the pre-tokenized corpus
/// (lowercased, split on whitespace and punctuation). Initial symbols are the
/// characters, with "##" marking non-initial positions; each merge joins the
/// most frequent adjacent pair, ties broken by the lexicographically smallest
/// (left, right) pair. Stops at `target_size` or when no pair remains.
///
/// Layout: reserved tokens, then the character alphabet ordered by
/// (frequency desc, token asc), then merged pieces in merge order. If the
/// alphabet alone exceeds the budget, the most frequent characters are kept.
/// Throws ConfigError if target_size < kNumReserved or the corpus has no text.
Vocabulary build_vocab(const std::vector<std::string>& documents, std::size_t target_size);

}  // namespace ftbert
