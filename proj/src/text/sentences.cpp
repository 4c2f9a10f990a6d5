#include "ftbert/text/sentences.hpp"

#include "ftbert/text/utf8.hpp"

namespace ftbert {

namespace {

bool is_terminator_en(const std::string& ch) { return ch == "." || ch == "!" || ch == "?"; }
bool is_terminator_zh(const std::string& ch) { return ch == "。" || ch == "？" || ch == "！"; }
bool is_closer(const std::string& ch) {
  return ch == "\"" || ch == "'" || ch == ")" || ch == "]" || ch == "”" || ch == "’";
}

void emit(std::vector<std::string>& out, const std::string& raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw) s += (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
  const auto first = s.find_first_not_of(' ');
  if (first == std::string::npos) return;
  const auto last = s.find_last_not_of(' ');
  out.push_back(s.substr(first, last - first + 1));
}

}  // namespace

std::vector<std::string> segment_sentences(std::string_view document, Language language) {
  const auto chars = utf8::split_chars(document);
  std::vector<std::string> out;
  std::string current;
  const std::size_t n = chars.size();
  for (std::size_t i = 0; i < n; ++i) {
    current += chars[i];
    if (language == Language::kChinese) {
      if (is_terminator_zh(chars[i])) {
        emit(out, current);
        current.clear();
      }
      continue;
    }
    if (!is_terminator_en(chars[i])) continue;
    // extend over the whole terminator run and any closing quotes
    std::size_t j = i + 1;
    while (j < n && (is_terminator_en(chars[j]) || is_closer(chars[j]))) current += chars[j++];
    i = j - 1;
    std::size_t k = j;
    while (k < n && utf8::is_whitespace(utf8::decode(chars[k]))) ++k;
    const bool at_end = k == n;
    const bool before_upper = k > j && k < n && chars[k].size() == 1 && chars[k][0] >= 'A' &&
                              chars[k][0] <= 'Z';
    if (at_end || before_upper) {
      emit(out, current);
      current.clear();
    }
  }
  emit(out, current);
  return out;
}

}  // namespace ftbert
