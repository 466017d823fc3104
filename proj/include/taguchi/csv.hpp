#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "taguchi/error.hpp"

namespace taguchi::csv {

// Minimal RFC 4180 reader/writer. Fields containing a comma, quote or
// newline are quoted on write; quoted fields are unescaped on read.

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += escape(fields[i]);
  }
  return line;
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Parses a whole document into records. Blank lines are skipped. A UTF-8
// byte order mark at the start is ignored.
inline std::vector<std::vector<std::string>> parse(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool line_has_content = false;

  auto end_field = [&] {
    record.push_back(field_quoted ? field : std::string(trim(field)));
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (line_has_content) records.push_back(std::move(record));
    record.clear();
    line_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_quoted = true;
        line_has_content = true;
        field.clear();
        break;
      case ',':
        end_field();
        line_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        if (c != ' ' && c != '\t') line_has_content = true;
        field += c;
    }
  }
  if (in_quotes) throw Error(ErrorCode::parse, "csv: unterminated quoted field");
  end_record();
  return records;
}

}  // namespace taguchi::csv
