#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edgemark::csv {

/// One parsed record and the physical line it starts on (1-based).
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// Comma-separated, double-quote quoting, doubled-quote escaping. Quoted
/// fields may span lines. Throws Error{MalformedRow} on an unterminated quote
/// or stray characters after a closing quote.
std::vector<Record> parse(std::string_view text);

/// Reads the whole file; throws Error{MissingFile} when it cannot be opened.
std::string read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value);
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

}  // namespace edgemark::csv
