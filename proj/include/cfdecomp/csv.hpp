#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cfdecomp::csv {

struct Record {
  std::size_t row = 0;  // 1-based line number in the source
  std::vector<std::string> fields;
};

// Parses comma-separated text with optional double-quoted fields. Blank
// lines are skipped. Throws ParseError on an unterminated quote.
std::vector<Record> read(std::istream& in);
std::vector<Record> read_file(const std::string& path);

// Missing-value tokens: "", "NA", "NaN", "nan", ".".
bool is_missing(std::string_view field);

// Parses a finite or non-finite double; nullopt if the token is not a number.
std::optional<double> parse_double(std::string_view field);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

// Fixed-point text with `digits` decimals.
std::string format_fixed(double value, int digits);

// Quotes the field if it contains a comma, quote or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace cfdecomp::csv
