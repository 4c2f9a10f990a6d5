#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ftbert/text/sentences.hpp"
#include "ftbert/text/tokenizer.hpp"

namespace ftbert {

enum class Domain { kSentiment, kQuestion, kTopic };

Domain parse_domain(std::string_view name);
std::string to_string(Domain domain);

/// Domain of the seven English benchmark ids: imdb, yelp_p, yelp_f
/// (sentiment); trec, yahoo (question); ag, dbpedia (topic).
std::optional<Domain> known_domain(std::string_view dataset);

struct PretrainScope {
  enum class Kind { kWithinTask, kInDomain, kCrossDomain };

  Kind kind = Kind::kWithinTask;
  std::vector<std::string> datasets;
  /// Overrides and additions to `known_domain`.
  std::map<std::string, Domain> domains;

  Domain domain_of(const std::string& dataset) const;
  /// Within-task: exactly one dataset. In-domain: one shared domain label.
  /// Throws ConfigError otherwise, or when empty.
  void validate() const;

  static Kind parse_kind(std::string_view name);
};

std::string to_string(PretrainScope::Kind kind);

/// Raw documents of one dataset. Test texts are never added to a corpus;
/// they only feed overlap removal.
struct CorpusSource {
  std::string name;
  std::vector<std::string> train_texts;
  std::vector<std::string> test_texts;
};

struct Document {
  std::string source;
  std::vector<std::string> sentences;
};

using Corpus = std::vector<Document>;

/// Whitespace-collapsed, ASCII-case-folded FNV-1a hash of a text.
std::uint64_t normalized_hash(std::string_view text);

/// Training documents of the scope's datasets in scope order, sentence
/// segmented; documents with no sentence are dropped. For every dataset that
/// appears in a `dedup_pairs` entry, a document whose normalized text was
/// already taken from such a dataset, or that matches a test document of any
/// dataset it is paired with, is dropped. Throws ConfigError for an invalid
/// scope or a dataset with no source.
Corpus assemble_corpus(const PretrainScope& scope, const std::vector<CorpusSource>& sources,
                       const std::vector<std::pair<std::string, std::string>>& dedup_pairs = {},
                       Language language = Language::kEnglish);

/// One sentence per line, a blank line after each document.
std::string format_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view text);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

/// doc -> sentence -> word-piece ids. Sentences without pieces and documents
/// without sentences are dropped.
using TokenizedCorpus = std::vector<std::vector<std::vector<int>>>;

TokenizedCorpus tokenize_corpus(const Corpus& corpus, const WordPieceTokenizer& tokenizer);

}  // namespace ftbert
