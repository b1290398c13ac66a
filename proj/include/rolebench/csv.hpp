#pragma once

// Minimal RFC 4180 reader: comma separated, double-quoted fields, "" escapes.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rolebench/error.hpp"

namespace rolebench::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the row starts
  std::vector<std::string> fields;
};

inline std::vector<Row> parse(const std::string& text, const std::string& origin = "<csv>") {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  row.line = 1;
  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = Row{};
    row.line = line;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) throw ParseError(origin, line, "stray quote inside an unquoted field");
        quoted = field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw ParseError(origin, line, "unterminated quoted field");
  if (!field.empty() || !row.fields.empty()) end_row();
  return rows;
}

inline std::vector<Row> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

/// Column index of `name` in the header row, or a ParseError naming the file.
inline std::size_t column(const Row& header, const std::string& name, const std::string& origin) {
  for (std::size_t i = 0; i < header.fields.size(); ++i)
    if (header.fields[i] == name) return i;
  throw ParseError(origin, header.line, "missing column '" + name + "'");
}

inline double to_double(const std::string& s, const std::string& origin, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(origin, line, "not a number: '" + s + "'");
  }
}

}  // namespace rolebench::csv
