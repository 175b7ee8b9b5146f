#include "cfdecomp/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfdecomp/error.hpp"

namespace cfdecomp::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<Record> read(std::istream& in) {
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (trim(line).empty()) continue;
    Record rec;
    rec.row = line_no;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
      if (i == line.size()) {
        if (quoted) {
          // Quoted field spanning lines.
          std::string next;
          if (!std::getline(in, next)) throw ParseError("unterminated quoted field", rec.row);
          ++line_no;
          field.push_back('\n');
          line += '\n';
          line += next;
          ++i;
          continue;
        }
        rec.fields.emplace_back(trim(field));
        break;
      }
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        rec.fields.emplace_back(trim(field));
        field.clear();
      } else {
        field.push_back(c);
      }
      ++i;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Record> read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read(in);
}

bool is_missing(std::string_view field) {
  field = trim(field);
  return field.empty() || field == "NA" || field == "NaN" || field == "nan" ||
         field == "." || field == "na";
}

std::optional<double> parse_double(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

std::string format_fixed(double value, int digits) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                       std::chars_format::fixed, digits);
  if (ec != std::errc()) return "nan";
  std::string s(buf.data(), ptr);
  if (s.starts_with("-")) {
    // Avoid "-0.000".
    bool all_zero = true;
    for (char c : s.substr(1))
      if (c != '0' && c != '.') all_zero = false;
    if (all_zero) s.erase(0, 1);
  }
  return s;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace cfdecomp::csv
