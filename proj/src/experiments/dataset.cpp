#include "ftbert/experiments/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ftbert/core/error.hpp"
#include "ftbert/core/log.hpp"
#include "ftbert/core/rng.hpp"

namespace ftbert {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& ex : examples) ++counts.at(static_cast<std::size_t>(ex.label));
  return counts;
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "csv-label-text") return DatasetFormat::kLabelText;
  if (name == "csv-label-title-body") return DatasetFormat::kLabelTitleBody;
  throw ConfigError("unknown dataset format '" + std::string(name) + "'");
}

std::string to_string(DatasetFormat format) {
  return format == DatasetFormat::kLabelText ? "csv-label-text" : "csv-label-title-body";
}

std::vector<CsvRecord> parse_csv(std::string_view text) {
  std::vector<CsvRecord> records;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < text.size()) {
    CsvRecord rec;
    rec.line = line;
    std::string field;
    bool end_of_record = false;
    while (!end_of_record) {
      field.clear();
      if (i < text.size() && text[i] == '"') {
        ++i;
        bool closed = false;
        while (i < text.size()) {
          const char c = text[i++];
          if (c == '"') {
            if (i < text.size() && text[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              closed = true;
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (!closed) throw ParseError("unterminated quoted field", rec.line);
        if (i < text.size() && text[i] == '\r') ++i;
        if (i < text.size() && text[i] != ',' && text[i] != '\n') {
          throw ParseError("unexpected character after closing quote", line);
        }
      } else {
        while (i < text.size() && text[i] != ',' && text[i] != '\n') field.push_back(text[i++]);
        if (!field.empty() && field.back() == '\r') field.pop_back();
      }
      rec.fields.push_back(field);
      if (i < text.size() && text[i] == ',') {
        ++i;
      } else {
        if (i < text.size()) ++i;  // '\n'
        ++line;
        end_of_record = true;
      }
    }
    if (!(rec.fields.size() == 1 && rec.fields[0].empty())) records.push_back(std::move(rec));
  }
  return records;
}

namespace {

std::string clean_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out.push_back(' ');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  const auto first = out.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(" \t\r\n");
  return out.substr(first, last - first + 1);
}

}  // namespace

Dataset parse_dataset(std::string_view csv, DatasetFormat format, std::size_t num_classes, std::string name) {
  if (num_classes < 2) throw ConfigError("a dataset needs at least two classes");
  const std::size_t expected = format == DatasetFormat::kLabelText ? 2 : 3;
  Dataset ds{std::move(name), num_classes, {}};
  for (const auto& rec : parse_csv(csv)) {
    if (rec.fields.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " fields, found " + std::to_string(rec.fields.size()),
                       rec.line);
    }
    const auto& lf = rec.fields[0];
    long label = 0;
    const auto [end, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc{} || end != lf.data() + lf.size()) throw ParseError("label '" + lf + "' is not an integer", rec.line);
    if (label < 1 || label > static_cast<long>(num_classes)) {
      throw ParseError("label " + lf + " outside 1.." + std::to_string(num_classes), rec.line);
    }
    std::string text = expected == 2 ? clean_text(rec.fields[1])
                                     : clean_text(clean_text(rec.fields[1]) + " " + clean_text(rec.fields[2]));
    if (text.empty()) throw ParseError("empty text", rec.line);
    ds.examples.push_back({static_cast<int>(label - 1), std::move(text)});
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, std::size_t num_classes,
                     std::string name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (name.empty()) name = path.stem().string();
  return parse_dataset(buf.str(), format, num_classes, std::move(name));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset '" + path.string() + "'");
  for (const auto& ex : dataset.examples) {
    out << '"' << ex.label + 1 << "\",\"";
    for (const char c : ex.text) {
      if (c == '"') out << '"';
      out << c;
    }
    out << "\"\n";
  }
}

std::vector<std::size_t> stratified_counts(const std::vector<std::size_t>& class_sizes, double fraction) {
  const std::size_t n = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> counts(class_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = fraction * static_cast<double>(class_sizes[c]);
    counts[c] = std::min(class_sizes[c], static_cast<std::size_t>(std::floor(exact)));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (const auto& [rem, c] : remainders) {
    if (assigned >= target) break;
    if (counts[c] < class_sizes[c]) {
      ++counts[c];
      ++assigned;
    }
  }
  return counts;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    by_class.at(static_cast<std::size_t>(ds.examples[i].label)).push_back(i);
  }
  return by_class;
}

// Marks `counts[c]` seeded-random members of each class.
std::vector<bool> pick(const std::vector<std::vector<std::size_t>>& by_class, const std::vector<std::size_t>& counts,
                       std::size_t total, std::uint64_t seed) {
  std::vector<bool> chosen(total, false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto members = by_class[c];
    Rng rng = Rng::derive(seed, c);
    rng.shuffle(members);
    for (std::size_t k = 0; k < counts[c]; ++k) chosen[members[k]] = true;
  }
  return chosen;
}

}  // namespace

std::pair<Dataset, Dataset> split_validation(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
  const auto by_class = indices_by_class(dataset);
  std::vector<std::size_t> sizes;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < 2) {
      throw ConfigError("class " + std::to_string(c) + " of '" + dataset.name + "' has fewer than two examples");
    }
    sizes.push_back(by_class[c].size());
  }
  const auto counts = stratified_counts(sizes, fraction);
  const auto chosen = pick(by_class, counts, dataset.size(), seed);
  Dataset train{dataset.name, dataset.num_classes, {}};
  Dataset validation{dataset.name, dataset.num_classes, {}};
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (chosen[i] ? validation : train).examples.push_back(dataset.examples[i]);
  }
  return {std::move(train), std::move(validation)};
}

Dataset subsample(const Dataset& train, double proportion, std::uint64_t seed) {
  if (!(proportion > 0.0 && proportion <= 1.0)) throw ConfigError("subsample proportion must lie in (0, 1]");
  const auto by_class = indices_by_class(train);
  std::vector<std::size_t> sizes;
  for (const auto& members : by_class) sizes.push_back(members.size());
  auto counts = stratified_counts(sizes, proportion);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0 && sizes[c] > 0) {
      log_warning("subsample: class " + std::to_string(c) + " rounds to 0 examples at proportion " +
                  std::to_string(proportion) + "; keeping 1");
      counts[c] = 1;
    }
  }
  const auto chosen = pick(by_class, counts, train.size(), seed);
  Dataset out{train.name, train.num_classes, {}};
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (chosen[i]) out.examples.push_back(train.examples[i]);
  }
  return out;
}

std::vector<EncodedExample> encode_dataset(const Dataset& dataset, const WordPieceTokenizer& tokenizer) {
  std::vector<EncodedExample> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset.examples) out.push_back({tokenizer.encode_ids(ex.text), ex.label});
  return out;
}

}  // namespace ftbert
