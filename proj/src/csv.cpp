#include "maskrr/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "maskrr/common.hpp"

namespace maskrr {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
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
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

int CsvTable::col(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

int CsvTable::col_required(const std::string& name) const {
  int j = col(name);
  if (j < 0) throw DataError(path + ": missing column '" + name + "'");
  return j;
}

const std::string& CsvTable::at(std::size_t row, int c) const {
  return rows[row][static_cast<std::size_t>(c)];
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  CsvTable t;
  t.path = path;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
  auto emit = [](std::ostringstream& out, const std::string& f) {
    if (f.find('\n') != std::string::npos)
      throw DataError("CSV field contains a line break: '" + f + "'");
    if (f.find_first_of(",\"\r") == std::string::npos) {
      out << f;
      return;
    }
    out << '"';
    for (char c : f) {
      if (c == '"') out << '"';
      out << c;
    }
    out << '"';
  };
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    emit(out, header[j]);
    out << (j + 1 < header.size() ? "," : "");
  }
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw DataError("CSV row width does not match header");
    for (std::size_t j = 0; j < row.size(); ++j) {
      emit(out, row[j]);
      out << (j + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
  return out.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  atomic_write_file(path, csv_to_string(header, rows));
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

double parse_double(const std::string& s, const std::string& context) {
  if (s.empty()) throw DataError(context + ": empty numeric field");
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size())
    throw DataError(context + ": invalid numeric value '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& context) {
  if (s.empty()) throw DataError(context + ": empty integer field");
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size())
    throw DataError(context + ": invalid integer value '" + s + "'");
  return v;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double x, int decimals) {
  double scale = std::pow(10.0, decimals);
  // round half away from zero, with a small nudge so values that are exactly
  // on a boundary up to representation error (e.g. 0.955) round upward
  double scaled = x * scale;
  double r = std::floor(std::abs(scaled) + 0.5 + 1e-9);
  double rounded = std::copysign(r, scaled) / scale;
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(decimals);
  out << rounded;
  std::string s = out.str();
  if (s == std::string("-0.") + std::string(static_cast<std::size_t>(decimals), '0') ||
      (decimals == 0 && s == "-0"))
    s.erase(s.begin());  // normalize negative zero
  return s;
}

}  // namespace maskrr
