#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edgemark {

/// A class name drawn from a dataset's declared label set.
struct ClassLabel {
  std::string name;

  friend auto operator<=>(const ClassLabel&, const ClassLabel&) = default;
};

struct LabeledSample {
  std::string id;
  std::string raw_text;
  std::string clean_text;
  ClassLabel label;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<ClassLabel> label_set;
  std::string source_path;
  /// True when no declaration was available and labels came from the rows.
  bool labels_inferred = false;

  const LabeledSample* find(std::string_view id) const;
  bool has_label(std::string_view name) const;
  /// Index of `name` in label_set, or nullopt.
  std::optional<std::size_t> label_index(std::string_view name) const;
  /// FNV-1a over ids, texts and labels in file order, as 16 hex digits.
  std::string fingerprint() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// The default reputation-polarity label set.
std::vector<ClassLabel> default_polarity_labels();

/// Social-media text cleaning. Removes URLs, emoji, punctuation, symbols and
/// control characters; collapses whitespace to single spaces and trims.
/// Letters, digits and combining marks are kept in their original order, and
/// case is preserved. The input must be valid UTF-8.
std::string preprocess(std::string_view raw);

/// True when `text` is well-formed UTF-8.
bool is_valid_utf8(std::string_view text);

enum class DatasetFormat { Csv };

struct LoadOptions {
  DatasetFormat format = DatasetFormat::Csv;
  /// Explicit label declaration (`--labels`). Takes precedence over a
  /// `# labels:` directive in the file.
  std::optional<std::vector<std::string>> labels;
};

/// Loads `id,text,label` CSV. An optional first line `# labels: a,b,c`
/// declares the label set. Throws Error with MissingFile, MalformedRow,
/// UnknownLabel or EmptyDataset.
Dataset load_dataset(const std::string& path, const LoadOptions& options = {});
Dataset parse_dataset(std::string_view text, const std::string& source_path,
                      const LoadOptions& options = {});

struct CleaningStats {
  std::size_t rows = 0;
  std::size_t rows_changed = 0;
  std::size_t raw_bytes = 0;
  std::size_t clean_bytes = 0;
  std::size_t rows_empty_after_cleaning = 0;
};

CleaningStats cleaning_stats(const Dataset& dataset);

}  // namespace edgemark
