#pragma once

#include <charconv>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "dynalloc/error.hpp"

namespace dynalloc {

/// Calendar date (proleptic Gregorian). Parsed from and printed as YYYY-MM-DD.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  /// Days since 1970-01-01.
  constexpr long serial() const {
    const int y = month <= 2 ? year - 1 : year;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned mp = static_cast<unsigned>(month > 2 ? month - 3 : month + 9);
    const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(day) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
  }

  static constexpr Date from_serial(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return Date{static_cast<int>(m <= 2 ? y + 1 : y), static_cast<int>(m), static_cast<int>(d)};
  }

  /// 0 = Sunday ... 6 = Saturday.
  constexpr int weekday() const {
    const long s = serial();
    return static_cast<int>(s >= -4 ? (s + 4) % 7 : (s + 5) % 7 + 6);
  }

  constexpr bool same_month(const Date& o) const { return year == o.year && month == o.month; }

  std::string to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  static Date parse(std::string_view s) {
    auto fail = [&] { return Error(ErrorKind::ParseError, "bad ISO-8601 date '" + std::string(s) + "'"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw fail();
    Date d;
    auto num = [&](std::size_t pos, std::size_t len, int& out) {
      auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
      if (r.ec != std::errc{} || r.ptr != s.data() + pos + len) throw fail();
    };
    num(0, 4, d.year);
    num(5, 2, d.month);
    num(8, 2, d.day);
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) throw fail();
    if (from_serial(d.serial()) != d) throw fail();
    return d;
  }
};

/// Weekday trading calendar starting at `start` (skipped forward to a weekday).
inline std::vector<Date> business_days(Date start, std::size_t count) {
  std::vector<Date> out;
  out.reserve(count);
  long s = start.serial();
  while (out.size() < count) {
    const Date d = Date::from_serial(s++);
    const int wd = d.weekday();
    if (wd != 0 && wd != 6) out.push_back(d);
  }
  return out;
}

}  // namespace dynalloc
