#include "edgemark/dataset.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <unordered_set>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"

namespace edgemark {

namespace {

std::vector<UChar32> decode(std::string_view text) {
  std::vector<UChar32> cps;
  cps.reserve(text.size());
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c >= 0) cps.push_back(c);
  }
  return cps;
}

void append_utf8(std::string& out, UChar32 c) {
  std::uint8_t buf[4];
  std::int32_t len = 0;
  UBool error = false;
  U8_APPEND(buf, len, 4, c, error);
  if (!error) out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c); }

bool is_ascii_alnum(UChar32 c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool matches_ci(const std::vector<UChar32>& cps, std::size_t at, std::string_view word) {
  if (at + word.size() > cps.size()) return false;
  for (std::size_t k = 0; k < word.size(); ++k) {
    UChar32 c = cps[at + k];
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
    if (c != static_cast<unsigned char>(word[k])) return false;
  }
  return true;
}

bool url_starts_at(const std::vector<UChar32>& cps, std::size_t i) {
  if (matches_ci(cps, i, "http://") || matches_ci(cps, i, "https://")) return true;
  return matches_ci(cps, i, "www.") && (i == 0 || !is_ascii_alnum(cps[i - 1]));
}

std::vector<UChar32> strip_urls(const std::vector<UChar32>& cps) {
  std::vector<UChar32> out;
  out.reserve(cps.size());
  std::size_t i = 0;
  while (i < cps.size()) {
    if (url_starts_at(cps, i)) {
      while (i < cps.size() && !is_space(cps[i])) ++i;
      continue;
    }
    out.push_back(cps[i++]);
  }
  return out;
}

bool is_emoji_component(UChar32 c) {
  return u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC) ||
         u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER) ||
         u_hasBinaryProperty(c, UCHAR_REGIONAL_INDICATOR) ||
         (c >= 0xFE00 && c <= 0xFE0F) ||    // variation selectors
         (c >= 0xE0100 && c <= 0xE01EF) ||  // variation selectors supplement
         (c >= 0xE0020 && c <= 0xE007F) ||  // tag characters
         c == 0x20E3 || c == 0x200D;        // keycap, zero width joiner
}

bool is_kept(UChar32 c) {
  if (is_emoji_component(c)) return false;
  switch (u_charType(c)) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
    case U_NON_SPACING_MARK:
    case U_ENCLOSING_MARK:
    case U_COMBINING_SPACING_MARK:
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
      return true;
    default:  // punctuation, symbols, controls, format, unassigned
      return false;
  }
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split_labels(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',') flush();
    else cur.push_back(c);
  }
  flush();
  return out;
}

std::vector<ClassLabel> make_label_set(const std::vector<std::string>& names,
                                       std::optional<std::size_t> line) {
  if (names.empty()) throw Error(ErrorCode::MalformedRow, "label set is empty", line);
  std::vector<ClassLabel> labels;
  for (const auto& n : names) {
    if (n.empty()) throw Error(ErrorCode::MalformedRow, "empty label in label set", line);
    if (std::any_of(labels.begin(), labels.end(), [&](const ClassLabel& l) { return l.name == n; }))
      throw Error(ErrorCode::MalformedRow, "duplicate label '" + n + "' in label set", line);
    labels.push_back(ClassLabel{n});
  }
  return labels;
}

}  // namespace

const LabeledSample* Dataset::find(std::string_view id) const {
  for (const auto& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

bool Dataset::has_label(std::string_view name) const { return label_index(name).has_value(); }

std::optional<std::size_t> Dataset::label_index(std::string_view name) const {
  for (std::size_t i = 0; i < label_set.size(); ++i)
    if (label_set[i].name == name) return i;
  return std::nullopt;
}

std::string Dataset::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& l : label_set) h = fnv1a(fnv1a(h, l.name), std::string_view("\x1f", 1));
  for (const auto& s : samples) {
    h = fnv1a(h, s.id);
    h = fnv1a(h, std::string_view("\x1f", 1));
    h = fnv1a(h, s.raw_text);
    h = fnv1a(h, std::string_view("\x1f", 1));
    h = fnv1a(h, s.label.name);
    h = fnv1a(h, std::string_view("\x1e", 1));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<ClassLabel> default_polarity_labels() {
  return {ClassLabel{"positive"}, ClassLabel{"neutral"}, ClassLabel{"negative"}};
}

bool is_valid_utf8(std::string_view text) {
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c < 0) return false;
  }
  return true;
}

std::string preprocess(std::string_view raw) {
  const auto cps = strip_urls(decode(raw));
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (UChar32 c : cps) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (!is_kept(c)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    append_utf8(out, c);
  }
  return out;
}

Dataset parse_dataset(std::string_view text, const std::string& source_path,
                      const LoadOptions& options) {
  // Optional label directive before the header.
  std::optional<std::vector<std::string>> directive;
  std::size_t line_offset = 0;
  if (text.starts_with("# labels:")) {
    auto eol = text.find('\n');
    auto directive_text = text.substr(9, eol == std::string_view::npos ? text.size() - 9 : eol - 9);
    directive = split_labels(directive_text);
    text = eol == std::string_view::npos ? std::string_view() : text.substr(eol + 1);
    line_offset = 1;
  }

  std::vector<csv::Record> records;
  try {
    records = csv::parse(text);
  } catch (const Error& e) {
    throw Error(e.code(), "malformed CSV", e.line() ? std::optional(*e.line() + line_offset)
                                                    : std::nullopt);
  }
  if (records.empty()) throw Error(ErrorCode::MalformedRow, "missing header row", 1 + line_offset);

  const auto& header = records.front();
  if (header.fields != std::vector<std::string>{"id", "text", "label"})
    throw Error(ErrorCode::MalformedRow, "header must be exactly id,text,label",
                header.line + line_offset);

  Dataset ds;
  ds.source_path = source_path;
  if (options.labels) {
    ds.label_set = make_label_set(*options.labels, std::nullopt);
  } else if (directive) {
    ds.label_set = make_label_set(*directive, 1);
  } else {
    ds.labels_inferred = true;
  }
  const bool declared = !ds.labels_inferred;

  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t line = rec.line + line_offset;
    if (rec.fields.size() != 3)
      throw Error(ErrorCode::MalformedRow,
                  "expected 3 fields, got " + std::to_string(rec.fields.size()), line);
    const auto& id = rec.fields[0];
    const auto& raw = rec.fields[1];
    const auto& label = rec.fields[2];
    if (id.empty()) throw Error(ErrorCode::MalformedRow, "empty id", line);
    if (label.empty()) throw Error(ErrorCode::MalformedRow, "empty label", line);
    for (const auto& f : rec.fields)
      if (!is_valid_utf8(f)) throw Error(ErrorCode::MalformedRow, "invalid UTF-8", line);
    if (!seen_ids.insert(id).second)
      throw Error(ErrorCode::MalformedRow, "duplicate id '" + id + "'", line);
    if (declared) {
      if (!ds.has_label(label))
        throw Error(ErrorCode::UnknownLabel, "label '" + label + "' is not declared", line);
    } else if (!ds.has_label(label)) {
      ds.label_set.push_back(ClassLabel{label});
    }
    ds.samples.push_back(LabeledSample{id, raw, preprocess(raw), ClassLabel{label}});
  }
  if (ds.samples.empty()) throw Error(ErrorCode::EmptyDataset, source_path + " has no data rows");
  return ds;
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  return parse_dataset(csv::read_file(path), path, options);
}

CleaningStats cleaning_stats(const Dataset& dataset) {
  CleaningStats st;
  for (const auto& s : dataset.samples) {
    ++st.rows;
    st.raw_bytes += s.raw_text.size();
    st.clean_bytes += s.clean_text.size();
    if (s.raw_text != s.clean_text) ++st.rows_changed;
    if (s.clean_text.empty()) ++st.rows_empty_after_cleaning;
  }
  return st;
}

}  // namespace edgemark
