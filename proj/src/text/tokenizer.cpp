#include "ftbert/text/tokenizer.hpp"

#include "ftbert/text/utf8.hpp"

namespace ftbert {

std::vector<std::string> pretokenize(std::string_view text) {
  const std::string lowered = utf8::to_lower(text);
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (auto& ch : utf8::split_chars(lowered)) {
    const char32_t cp = utf8::decode(ch);
    if (utf8::is_whitespace(cp) || cp == 0 || cp == 0xFFFD || (cp < 32 && cp != '\t')) {
      flush();
    } else if (utf8::is_punctuation(cp) || utf8::is_cjk_ideograph(cp)) {
      flush();
      words.push_back(std::move(ch));
    } else {
      current += ch;
    }
  }
  flush();
  return words;
}

std::vector<std::string> WordPieceTokenizer::tokenize_word(std::string_view word) const {
  const auto chars = utf8::split_chars(word);
  if (chars.size() > max_chars_) return {std::string(Vocabulary::kReserved[Vocabulary::kUnk])};
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::size_t end = chars.size();
    std::string match;
    while (start < end) {
      std::string candidate = start > 0 ? "##" : "";
      for (std::size_t i = start; i < end; ++i) candidate += chars[i];
      if (vocab_->contains(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) return {std::string(Vocabulary::kReserved[Vocabulary::kUnk])};
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& word : pretokenize(text)) {
    for (auto& piece : tokenize_word(word)) out.push_back(std::move(piece));
  }
  return out;
}

std::vector<int> WordPieceTokenizer::encode_ids(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& piece : tokenize(text)) ids.push_back(vocab_->id(piece));
  return ids;
}

std::string detokenize(const std::vector<std::string>& pieces) {
  std::string out;
  for (const auto& p : pieces) {
    if (p.rfind("##", 0) == 0) {
      out += p.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += p;
    }
  }
  return out;
}

}  // namespace ftbert
