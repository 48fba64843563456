#include "walltherm/csvio.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>

#include "walltherm/errors.hpp"

namespace walltherm {

size_t CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError("missing CSV column '" + name + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(',', start);
    std::string field = line.substr(start, pos == std::string::npos ? pos : pos - start);
    // trim surrounding whitespace and a trailing CR
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ' || field.back() == '\t')) {
      field.pop_back();
    }
    size_t first = 0;
    while (first < field.size() && (field[first] == ' ' || field[first] == '\t')) ++first;
    fields.push_back(field.substr(first));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw DataError(path + ": empty file");
  return table;
}

double parse_double(const std::string& field, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || errno == ERANGE) {
    throw DataError(where + ": invalid number '" + field + "'");
  }
  return value;
}

long long parse_int(const std::string& field, const std::string& where) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError(where + ": invalid integer '" + field + "'");
  }
  return value;
}

unsigned long long parse_uint(const std::string& field, const std::string& where) {
  unsigned long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError(where + ": invalid unsigned integer '" + field + "'");
  }
  return value;
}

std::string fmt_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

}  // namespace walltherm
