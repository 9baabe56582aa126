#pragma once

// Minimal delimited-text reader/writer (comma or tab, header row, UTF-8 passthrough).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lingpred/error.hpp"

namespace lingpred {

enum class Delimiter { Auto, Comma, Tab };

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number in the source for each row (header is line 1).
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }

  std::size_t require_column(std::string_view name, std::string_view what) const {
    auto c = column(name);
    if (!c) throw DataError(std::string(what) + ": missing required column '" + std::string(name) + "'");
    return *c;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one record, honouring double-quoted fields ("" escapes a quote).
inline std::vector<std::string> split_record(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && trim(cur).empty()) {
      cur.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == delim) {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

}  // namespace detail

inline Table read_table(std::istream& in, Delimiter delim = Delimiter::Auto,
                        std::string_view what = "table") {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  char d = ',';
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty() || line[0] == '#') continue;
    if (!have_header) {
      if (delim == Delimiter::Tab || (delim == Delimiter::Auto && line.find('\t') != std::string::npos))
        d = '\t';
      try {
        t.header = detail::split_record(line, d);
      } catch (const DataError& e) {
        throw DataError(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
      }
      have_header = true;
      continue;
    }
    std::vector<std::string> fields;
    try {
      fields = detail::split_record(line, d);
    } catch (const DataError& e) {
      throw DataError(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
    }
    if (fields.size() != t.header.size())
      throw DataError(std::string(what) + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (!have_header) throw DataError(std::string(what) + ": empty input (no header row)");
  return t;
}

inline Table read_table_file(const std::string& path, Delimiter delim = Delimiter::Auto) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_table(in, delim, path);
}

inline std::string quote_field(std::string_view s, char delim = ',') {
  const bool padded = !s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) ||
                                     std::isspace(static_cast<unsigned char>(s.back())));
  if (!padded && s.find(delim) == std::string_view::npos && s.find('"') == std::string_view::npos &&
      s.find_first_of("\r\n") == std::string_view::npos && (s.empty() || s.front() != '#'))
    return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields, char delim = ',') {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << delim;
    out << quote_field(fields[i], delim);
  }
  out << '\n';
}

// Shortest decimal that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Fixed 17 significant digits, for model files.
inline std::string format_double17(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
  std::string str(s);
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(str, &pos);
  } catch (const std::exception&) {
    throw DataError(std::string(what) + ": not a number: '" + str + "'");
  }
  if (pos != str.size()) throw DataError(std::string(what) + ": not a number: '" + str + "'");
  return v;
}

inline long long parse_int(std::string_view s, std::string_view what) {
  std::string str(s);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(str, &pos);
  } catch (const std::exception&) {
    throw DataError(std::string(what) + ": not an integer: '" + str + "'");
  }
  if (pos != str.size()) throw DataError(std::string(what) + ": not an integer: '" + str + "'");
  return v;
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ';') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(sep, start);
    if (end == std::string_view::npos) end = s.size();
    auto item = detail::trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items, std::string_view sep = ";") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace lingpred
