#include "walltherm/timeutil.hpp"

#include <cctype>
#include <cstdio>

#include "walltherm/errors.hpp"

namespace walltherm {
namespace {

bool all_digits(const std::string& s, size_t begin, size_t end) {
  if (end > s.size() || begin >= end) return false;
  for (size_t i = begin; i < end; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

int to_int(const std::string& s, size_t begin, size_t end) {
  int v = 0;
  for (size_t i = begin; i < end; ++i) v = v * 10 + (s[i] - '0');
  return v;
}

bool valid_date(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1) return false;
  static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int len = lengths[m - 1];
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m == 2 && leap) len = 29;
  return d <= len;
}

}  // namespace

std::int64_t days_from_civil(const CivilDate& date) {
  // Howard Hinnant's algorithm.
  std::int64_t y = date.year;
  const int m = date.month;
  const int d = date.day;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t days) {
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                   static_cast<int>(d)};
}

std::int64_t epoch_from_civil(const CivilDate& date, int hour, int minute, int second) {
  return days_from_civil(date) * 86400 + hour * 3600 + minute * 60 + second;
}

CivilDate civil_from_epoch(std::int64_t epoch_s) {
  std::int64_t days = epoch_s / 86400;
  if (epoch_s % 86400 < 0) --days;
  return civil_from_days(days);
}

int second_of_day(std::int64_t epoch_s) {
  std::int64_t rem = epoch_s % 86400;
  if (rem < 0) rem += 86400;
  return static_cast<int>(rem);
}

std::int64_t parse_iso8601(const std::string& text) {
  // YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':' ||
      !all_digits(text, 0, 4) || !all_digits(text, 5, 7) || !all_digits(text, 8, 10) ||
      !all_digits(text, 11, 13) || !all_digits(text, 14, 16) ||
      !all_digits(text, 17, 19)) {
    throw DataError("invalid ISO 8601 timestamp: '" + text + "'");
  }
  const int year = to_int(text, 0, 4);
  const int month = to_int(text, 5, 7);
  const int day = to_int(text, 8, 10);
  const int hour = to_int(text, 11, 13);
  const int minute = to_int(text, 14, 16);
  const int second = to_int(text, 17, 19);
  if (!valid_date(year, month, day) || hour > 23 || minute > 59 || second > 60) {
    throw DataError("invalid ISO 8601 timestamp: '" + text + "'");
  }

  size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start) throw DataError("invalid ISO 8601 timestamp: '" + text + "'");
  }

  std::int64_t offset_s = 0;
  if (pos < text.size()) {
    const char sign = text[pos];
    if (sign == 'Z' || sign == 'z') {
      ++pos;
    } else if (sign == '+' || sign == '-') {
      if (pos + 6 > text.size() || text[pos + 3] != ':' ||
          !all_digits(text, pos + 1, pos + 3) || !all_digits(text, pos + 4, pos + 6)) {
        throw DataError("invalid ISO 8601 offset: '" + text + "'");
      }
      const int oh = to_int(text, pos + 1, pos + 3);
      const int om = to_int(text, pos + 4, pos + 6);
      offset_s = (sign == '+' ? 1 : -1) * (oh * 3600 + om * 60);
      pos += 6;
    }
  }
  if (pos != text.size()) throw DataError("invalid ISO 8601 timestamp: '" + text + "'");

  return epoch_from_civil(CivilDate{year, month, day}, hour, minute, second) - offset_s;
}

std::string format_iso8601_utc(std::int64_t epoch_s) {
  const CivilDate date = civil_from_epoch(epoch_s);
  const int sod = second_of_day(epoch_s);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", date.year,
                date.month, date.day, sod / 3600, (sod / 60) % 60, sod % 60);
  return buf;
}

CivilDate parse_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
      !all_digits(text, 0, 4) || !all_digits(text, 5, 7) || !all_digits(text, 8, 10)) {
    throw DataError("invalid date: '" + text + "' (expected YYYY-MM-DD)");
  }
  const CivilDate date{to_int(text, 0, 4), to_int(text, 5, 7), to_int(text, 8, 10)};
  if (!valid_date(date.year, date.month, date.day)) {
    throw DataError("invalid date: '" + text + "'");
  }
  return date;
}

std::string format_date(const CivilDate& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", date.year, date.month, date.day);
  return buf;
}

Season season_of(const CivilDate& date) {
  switch (date.month) {
    case 12:
    case 1:
    case 2:
      return Season::winter;
    case 3:
    case 4:
    case 5:
      return Season::spring;
    case 6:
    case 7:
    case 8:
      return Season::summer;
    default:
      return Season::fall;
  }
}

std::string season_name(Season season) {
  switch (season) {
    case Season::winter: return "winter";
    case Season::spring: return "spring";
    case Season::summer: return "summer";
    case Season::fall: return "fall";
  }
  return "unknown";
}

}  // namespace walltherm
