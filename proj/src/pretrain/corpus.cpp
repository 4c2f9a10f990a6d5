#include "ftbert/pretrain/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ftbert/core/checkpoint.hpp"
#include "ftbert/core/error.hpp"
#include "ftbert/text/utf8.hpp"

namespace ftbert {

Domain parse_domain(std::string_view name) {
  if (name == "sentiment") return Domain::kSentiment;
  if (name == "question") return Domain::kQuestion;
  if (name == "topic") return Domain::kTopic;
  throw ConfigError("unknown domain '" + std::string(name) + "'");
}

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::kSentiment: return "sentiment";
    case Domain::kQuestion: return "question";
    case Domain::kTopic: return "topic";
  }
  return "?";
}

std::optional<Domain> known_domain(std::string_view dataset) {
  if (dataset == "imdb" || dataset == "yelp_p" || dataset == "yelp_f") return Domain::kSentiment;
  if (dataset == "trec" || dataset == "yahoo") return Domain::kQuestion;
  if (dataset == "ag" || dataset == "dbpedia") return Domain::kTopic;
  return std::nullopt;
}

PretrainScope::Kind PretrainScope::parse_kind(std::string_view name) {
  if (name == "within-task") return Kind::kWithinTask;
  if (name == "in-domain") return Kind::kInDomain;
  if (name == "cross-domain") return Kind::kCrossDomain;
  throw ConfigError("unknown pre-training scope '" + std::string(name) + "'");
}

std::string to_string(PretrainScope::Kind kind) {
  switch (kind) {
    case PretrainScope::Kind::kWithinTask: return "within-task";
    case PretrainScope::Kind::kInDomain: return "in-domain";
    case PretrainScope::Kind::kCrossDomain: return "cross-domain";
  }
  return "?";
}

Domain PretrainScope::domain_of(const std::string& dataset) const {
  if (const auto it = domains.find(dataset); it != domains.end()) return it->second;
  if (const auto d = known_domain(dataset)) return *d;
  throw ConfigError("no domain label for dataset '" + dataset + "'");
}

void PretrainScope::validate() const {
  if (datasets.empty()) throw ConfigError("pre-training scope has no datasets");
  if (std::set<std::string>(datasets.begin(), datasets.end()).size() != datasets.size()) {
    throw ConfigError("pre-training scope lists a dataset twice");
  }
  switch (kind) {
    case Kind::kWithinTask:
      if (datasets.size() != 1) throw ConfigError("within-task scope takes exactly one dataset");
      break;
    case Kind::kInDomain: {
      const Domain first = domain_of(datasets.front());
      for (const auto& d : datasets) {
        if (domain_of(d) != first) {
          throw ConfigError("in-domain scope mixes " + to_string(first) + " and " + to_string(domain_of(d)) +
                            " ('" + d + "')");
        }
      }
      break;
    }
    case Kind::kCrossDomain:
      break;
  }
}

std::uint64_t normalized_hash(std::string_view text) {
  std::string norm;
  norm.reserve(text.size());
  bool pending_space = false;
  for (const auto& ch : utf8::split_chars(text)) {
    if (utf8::is_whitespace(utf8::decode(ch))) {
      pending_space = !norm.empty();
      continue;
    }
    if (pending_space) norm.push_back(' ');
    pending_space = false;
    norm += ch;
  }
  norm = utf8::to_lower(norm);
  return fnv1a64(norm);
}

Corpus assemble_corpus(const PretrainScope& scope, const std::vector<CorpusSource>& sources,
                       const std::vector<std::pair<std::string, std::string>>& dedup_pairs, Language language) {
  scope.validate();
  std::map<std::string, const CorpusSource*> by_name;
  for (const auto& s : sources) by_name[s.name] = &s;
  auto source = [&](const std::string& name) -> const CorpusSource& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError("no documents for dataset '" + name + "'");
    return *it->second;
  };

  // partner datasets whose test documents must not leak into pre-training
  std::map<std::string, std::set<std::string>> partners;
  for (const auto& [x, y] : dedup_pairs) {
    partners[x].insert({x, y});
    partners[y].insert({x, y});
  }
  std::map<std::string, std::unordered_set<std::uint64_t>> test_hashes;
  for (const auto& [name, with] : partners) {
    for (const auto& p : with) {
      if (!by_name.count(p)) continue;
      for (const auto& t : by_name[p]->test_texts) test_hashes[name].insert(normalized_hash(t));
    }
  }

  Corpus corpus;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& name : scope.datasets) {
    const auto& src = source(name);
    const bool dedup = partners.count(name) > 0;
    for (const auto& text : src.train_texts) {
      if (dedup) {
        const auto h = normalized_hash(text);
        if (test_hashes[name].count(h) || !seen.insert(h).second) continue;
      }
      Document doc{name, segment_sentences(text, language)};
      if (!doc.sentences.empty()) corpus.push_back(std::move(doc));
    }
  }
  return corpus;
}

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& doc : corpus) {
    for (const auto& s : doc.sentences) {
      for (const char c : s) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
      out.push_back('\n');
    }
    out.push_back('\n');
  }
  return out;
}

Corpus parse_corpus(std::string_view text) {
  Corpus corpus;
  Document current;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (!current.sentences.empty()) corpus.push_back(std::move(current));
      current = Document{};
    } else {
      current.sentences.emplace_back(line);
    }
    start = end + 1;
  }
  if (!current.sentences.empty()) corpus.push_back(std::move(current));
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus '" + path.string() + "'");
  out << format_corpus(corpus);
  if (!out) throw Error("failed writing corpus '" + path.string() + "'");
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read corpus '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

TokenizedCorpus tokenize_corpus(const Corpus& corpus, const WordPieceTokenizer& tokenizer) {
  TokenizedCorpus out;
  for (const auto& doc : corpus) {
    std::vector<std::vector<int>> sentences;
    for (const auto& s : doc.sentences) {
      auto ids = tokenizer.encode_ids(s);
      if (!ids.empty()) sentences.push_back(std::move(ids));
    }
    if (!sentences.empty()) out.push_back(std::move(sentences));
  }
  return out;
}

}  // namespace ftbert
