#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ftbert/text/vocab.hpp"

namespace ftbert {

/// Lowercases, then splits on whitespace; every punctuation character and
/// every CJK ideograph becomes its own word.
std::vector<std::string> pretokenize(std::string_view text);

/// Greedy longest-match-first WordPiece over the words of `pretokenize`.
/// A word that cannot be covered entirely becomes a single [UNK]; so does a
/// word longer than `max_chars_per_word` characters.
class WordPieceTokenizer {
 public:
  explicit WordPieceTokenizer(const Vocabulary& vocab, std::size_t max_chars_per_word = 100)
      : vocab_(&vocab), max_chars_(max_chars_per_word) {}

  std::vector<std::string> tokenize(std::string_view text) const;
  std::vector<int> encode_ids(std::string_view text) const;
  /// Pieces of one already pre-tokenized word.
  std::vector<std::string> tokenize_word(std::string_view word) const;

  const Vocabulary& vocab() const { return *vocab_; }

 private:
  const Vocabulary* vocab_;
  std::size_t max_chars_;
};

/// Joins pieces back into text: "##" pieces attach to the previous piece,
/// words are separated by one space.
std::string detokenize(const std::vector<std::string>& pieces);

}  // namespace ftbert
