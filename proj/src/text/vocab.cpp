#include "ftbert/text/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "ftbert/core/checkpoint.hpp"
#include "ftbert/core/error.hpp"
#include "ftbert/text/tokenizer.hpp"
#include "ftbert/text/utf8.hpp"

namespace ftbert {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>(kReserved.begin(), kReserved.end())) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumReserved) throw ConfigError("vocabulary lacks the reserved tokens");
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens_[i] != kReserved[i]) {
      throw ConfigError("vocabulary id " + std::to_string(i) + " must be " +
                        std::string(kReserved[i]) + ", found '" + tokens_[i] + "'");
    }
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw ConfigError("empty token at id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    tokens.emplace_back(line);
    start = end + 1;
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open vocabulary " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::string Vocabulary::hash() const { return fnv1a_hex(to_text()); }

// ---------------------------------------------------------------------------

namespace {

using PairKey = std::uint64_t;

PairKey pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}
int pair_left(PairKey k) { return static_cast<int>(k >> 32); }
int pair_right(PairKey k) { return static_cast<int>(k & 0xFFFFFFFFu); }

struct Word {
  std::vector<int> symbols;
  std::int64_t freq = 0;
};

class MergeState {
 public:
  int intern(const std::string& s) {
    auto [it, inserted] = ids_.emplace(s, static_cast<int>(strings_.size()));
    if (inserted) strings_.push_back(s);
    return it->second;
  }
  const std::string& str(int id) const { return strings_[id]; }

  void add_word(std::vector<int> symbols, std::int64_t freq) {
    words_.push_back({std::move(symbols), freq});
    count_word(words_.size() - 1, +1);
  }

  /// Best pair by (count desc, left asc, right asc); nullopt when none left.
  std::optional<PairKey> best_pair() const {
    std::optional<PairKey> best;
    std::int64_t best_count = 0;
    for (const auto& [key, count] : counts_) {
      if (count <= 0) continue;
      if (!best || count > best_count ||
          (count == best_count &&
           std::tie(str(pair_left(key)), str(pair_right(key))) <
               std::tie(str(pair_left(*best)), str(pair_right(*best))))) {
        best = key;
        best_count = count;
      }
    }
    return best;
  }

  void merge(PairKey key, int merged) {
    const int a = pair_left(key), b = pair_right(key);
    auto where = std::move(where_[key]);
    where_.erase(key);
    std::sort(where.begin(), where.end());
    where.erase(std::unique(where.begin(), where.end()), where.end());
    for (std::size_t w : where) {
      auto& syms = words_[w].symbols;
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        if (syms[i] == a && syms[i + 1] == b) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      count_word(w, -1);
      std::vector<int> out;
      out.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          out.push_back(merged);
          ++i;
        } else {
          out.push_back(syms[i]);
        }
      }
      syms = std::move(out);
      count_word(w, +1);
    }
    counts_.erase(key);
  }

 private:
  void count_word(std::size_t w, int sign) {
    const auto& word = words_[w];
    for (std::size_t i = 0; i + 1 < word.symbols.size(); ++i) {
      const PairKey k = pair_key(word.symbols[i], word.symbols[i + 1]);
      counts_[k] += sign * word.freq;
      if (sign > 0) where_[k].push_back(w);
    }
  }

  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> strings_;
  std::vector<Word> words_;
  std::unordered_map<PairKey, std::int64_t> counts_;
  std::unordered_map<PairKey, std::vector<std::size_t>> where_;
};

std::string strip_continuation(const std::string& piece) {
  return piece.rfind("##", 0) == 0 ? piece.substr(2) : piece;
}

}  // namespace

Vocabulary build_vocab(const std::vector<std::string>& documents, std::size_t target_size) {
  if (target_size < static_cast<std::size_t>(Vocabulary::kNumReserved)) {
    throw ConfigError("target vocabulary size " + std::to_string(target_size) +
                      " is smaller than the " + std::to_string(Vocabulary::kNumReserved) +
                      " reserved tokens");
  }
  std::map<std::string, std::int64_t> word_freq;
  for (const auto& doc : documents) {
    for (auto& w : pretokenize(doc)) ++word_freq[w];
  }
  if (word_freq.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");

  MergeState state;
  std::map<std::string, std::int64_t> symbol_freq;
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> split_words;
  for (const auto& [word, freq] : word_freq) {
    auto chars = utf8::split_chars(word);
    for (std::size_t i = 1; i < chars.size(); ++i) chars[i] = "##" + chars[i];
    for (const auto& c : chars) symbol_freq[c] += freq;
    split_words.emplace_back(std::move(chars), freq);
  }

  std::vector<std::pair<std::string, std::int64_t>> alphabet(symbol_freq.begin(),
                                                             symbol_freq.end());
  std::stable_sort(alphabet.begin(), alphabet.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });

  std::vector<std::string> tokens(Vocabulary::kReserved.begin(), Vocabulary::kReserved.end());
  const std::size_t budget = target_size - tokens.size();
  if (alphabet.size() >= budget) {
    for (std::size_t i = 0; i < budget; ++i) tokens.push_back(alphabet[i].first);
    return Vocabulary(std::move(tokens));
  }
  std::unordered_map<std::string, bool> present;
  for (const auto& [sym, freq] : alphabet) {
    tokens.push_back(sym);
    present[sym] = true;
  }

  for (const auto& [chars, freq] : split_words) {
    std::vector<int> ids;
    ids.reserve(chars.size());
    for (const auto& c : chars) ids.push_back(state.intern(c));
    state.add_word(std::move(ids), freq);
  }

  while (tokens.size() < target_size) {
    const auto best = state.best_pair();
    if (!best) break;
    const std::string merged =
        state.str(pair_left(*best)) + strip_continuation(state.str(pair_right(*best)));
    const int merged_id = state.intern(merged);
    state.merge(*best, merged_id);
    if (!present[merged]) {
      present[merged] = true;
      tokens.push_back(merged);
    }
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace ftbert
