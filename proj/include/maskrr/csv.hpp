#pragma once

#include <string>
#include <vector>

namespace maskrr {

// Minimal CSV support with standard quoting: fields containing commas,
// quotes, or carriage returns are wrapped in double quotes with inner quotes
// doubled. Line breaks inside fields are not supported.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;           // -1 if absent
  int col_required(const std::string& name) const;  // throws DataError
  const std::string& at(std::size_t row, int col) const;
};

CsvTable read_csv(const std::string& path);

// Writes header + rows, quoting fields as needed; rejects embedded newlines.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Serialize to a string (same format as write_csv).
std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows);

// Atomic file write: writes to a temporary sibling then renames into place.
void atomic_write_file(const std::string& path, const std::string& content);

// Parse helpers with location-aware error messages.
double parse_double(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

// Shortest round-trip decimal representation (locale-independent,
// deterministic across runs). Used for all numeric file output.
std::string format_double(double x);

// Fixed-decimal representation with round-half-away-from-zero, matching how
// the report tables print estimates (e.g. 0.955 -> "0.96" at 2 decimals).
std::string format_fixed(double x, int decimals);

}  // namespace maskrr
