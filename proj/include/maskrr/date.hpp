#pragma once

#include <compare>
#include <cstdio>
#include <string>
#include <tuple>

#include "maskrr/common.hpp"

namespace maskrr {

// Calendar date backed by a day count since 1970-01-01 (proleptic Gregorian).
// All arithmetic is in whole calendar days.
class Date {
 public:
  Date() : days_(0) {}

  static Date from_days(int d) {
    Date x;
    x.days_ = d;
    return x;
  }

  static Date from_ymd(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1 || d > 31)
      throw DataError("invalid calendar date components");
    return from_days(days_from_civil(y, m, d));
  }

  // Strict ISO-8601 calendar date, e.g. "2020-09-01".
  static Date parse(const std::string& s) {
    int y = 0, m = 0, d = 0;
    char tail = '\0';
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) != 3 ||
        s.size() != 10)
      throw DataError("invalid ISO date: '" + s + "'");
    Date x = from_ymd(y, m, d);
    if (x.iso() != s) throw DataError("invalid ISO date: '" + s + "'");
    return x;
  }

  std::string iso() const {
    auto [y, m, d] = civil_from_days(days_);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return std::string(buf);
  }

  int days() const { return days_; }
  Date plus_days(int n) const { return from_days(days_ + n); }
  int operator-(const Date& o) const { return days_ - o.days_; }
  auto operator<=>(const Date&) const = default;

 private:
  int days_;

  // Howard Hinnant's civil-from-days / days-from-civil algorithms.
  static int days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
  }

  static std::tuple<int, int, int> civil_from_days(int z) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
  }
};

}  // namespace maskrr
