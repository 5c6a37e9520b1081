#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rectflow/error.hpp"

namespace rectflow {

// RFC-4180 reader: quoted fields with "" escapes, fields may contain commas
// and newlines inside quotes, rows end with LF or CRLF, trailing newline
// optional. Returns every record including the header.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;  // distinguishes a trailing empty line from data

  const auto end_cell = [&] {
    row.push_back(std::move(cell));
    cell.clear();
  };
  const auto end_row = [&] {
    end_cell();
    rows.push_back(std::move(row));
    row.clear();
    cell_started = false;
  };

  for (size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        cell_started = true;
        break;
      case ',':
        end_cell();
        cell_started = true;  // the comma implies a following cell
        break;
      case '\r':
        break;  // handled by the LF that follows
      case '\n':
        end_row();
        break;
      default:
        cell.push_back(ch);
        cell_started = true;
    }
  }
  require(!in_quotes, ErrorKind::parse, "csv: unterminated quoted field");
  if (cell_started || !cell.empty() || !row.empty()) end_row();
  return rows;
}

inline std::vector<std::vector<std::string>> read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io, "csv: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

// Quotes a field only when RFC-4180 requires it.
inline std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char ch : cell) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Strict full-cell parse; rejects trailing garbage and non-finite values.
inline double parse_double(std::string_view cell, const std::string& context) {
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  require(res.ec == std::errc() && res.ptr == cell.data() + cell.size() &&
              std::isfinite(v),
          ErrorKind::parse, "csv: unparsable numeric cell \"" + std::string(cell) +
                                "\" " + context);
  return v;
}

inline void write_csv_file(const std::string& path,
                           const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "csv: cannot write " + path);
  const auto emit = [&out](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out.put(',');
      out << csv_escape(cells[i]);
    }
    out.put('\n');
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  require(out.good(), ErrorKind::io, "csv: write failed for " + path);
}

}  // namespace rectflow
