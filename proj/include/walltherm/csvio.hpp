#pragma once

#include <string>
#include <vector>

namespace walltherm {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws DataError when missing.
  size_t column(const std::string& name) const;
};

// Reads a comma-separated file with one header line. Fields must not contain
// commas or quotes; blank lines and '#'-prefixed preamble lines are skipped.
// Rows with a field count different from the header raise DataError with the
// line number.
CsvTable read_csv(const std::string& path);

std::vector<std::string> split_csv_line(const std::string& line);

// strtod with error context; `where` names the file/line for the message.
double parse_double(const std::string& field, const std::string& where);
long long parse_int(const std::string& field, const std::string& where);
unsigned long long parse_uint(const std::string& field, const std::string& where);

// Shortest representation that round-trips a double exactly.
std::string fmt_double(double value);

}  // namespace walltherm
