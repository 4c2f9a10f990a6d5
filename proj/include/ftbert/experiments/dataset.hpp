#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ftbert/text/tokenizer.hpp"

namespace ftbert {

struct Example {
  int label = 0;
  std::string text;
};

/// Labeled classification data; labels lie in [0, num_classes).
struct Dataset {
  std::string name;
  std::size_t num_classes = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  std::vector<std::size_t> class_counts() const;
};

enum class DatasetFormat { kLabelText, kLabelTitleBody };

DatasetFormat parse_dataset_format(std::string_view name);
std::string to_string(DatasetFormat format);

/// RFC 4180 records: comma separated, double-quoted fields may contain commas,
/// newlines and doubled quotes. Each record carries the 1-based line on which
/// it starts. Throws ParseError on an unterminated quote or stray characters
/// after a closing quote.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRecord> parse_csv(std::string_view text);

/// Rows are `label,text` or `label,title,body` with 1-based labels. Labels are
/// shifted to 0-based; title and body are joined by one space. Backslash-n
/// sequences in the text become spaces. Throws ParseError (with the row's
/// line) on a wrong field count, a non-integer or out-of-range label, or an
/// empty text.
Dataset parse_dataset(std::string_view csv, DatasetFormat format, std::size_t num_classes,
                      std::string name = "");
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, std::size_t num_classes,
                     std::string name = "");
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Per class, the largest-remainder share of round(fraction * N): each class
/// gets floor(fraction * n_c) and the leftover units go to the largest
/// fractional parts (ties to the lower class id).
std::vector<std::size_t> stratified_counts(const std::vector<std::size_t>& class_sizes, double fraction);

/// Seeded, class-stratified split into (train, validation). Both keep the
/// original example order. Throws ConfigError when a class has fewer than two
/// examples or the fraction is outside (0, 1).
std::pair<Dataset, Dataset> split_validation(const Dataset& dataset, double fraction, std::uint64_t seed);

/// Seeded, class-stratified subset of round(proportion * N) examples in the
/// original order. A class whose share rounds to 0 still contributes one
/// example (with a warning).
Dataset subsample(const Dataset& train, double proportion, std::uint64_t seed);

/// Word-piece ids of one example, untruncated.
struct EncodedExample {
  std::vector<int> tokens;
  int label = 0;
};

std::vector<EncodedExample> encode_dataset(const Dataset& dataset, const WordPieceTokenizer& tokenizer);

}  // namespace ftbert
