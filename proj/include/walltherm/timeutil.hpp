#pragma once

#include <cstdint>
#include <string>

namespace walltherm {

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const CivilDate&) const = default;
};

// Days since 1970-01-01 (proleptic Gregorian calendar).
std::int64_t days_from_civil(const CivilDate& date);
CivilDate civil_from_days(std::int64_t days);

// Seconds since the UNIX epoch, UTC.
std::int64_t epoch_from_civil(const CivilDate& date, int hour = 0, int minute = 0,
                              int second = 0);
CivilDate civil_from_epoch(std::int64_t epoch_s);
int second_of_day(std::int64_t epoch_s);

// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional fractional-seconds part
// (truncated) and a "Z" or "+HH:MM"/"-HH:MM" offset suffix; a missing suffix
// means UTC. Throws DataError on malformed input.
std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601_utc(std::int64_t epoch_s);

// "YYYY-MM-DD"; throws DataError on malformed input.
CivilDate parse_date(const std::string& text);
std::string format_date(const CivilDate& date);

// Meteorological seasons: DJF winter, MAM spring, JJA summer, SON fall.
enum class Season { winter, spring, summer, fall };
Season season_of(const CivilDate& date);
std::string season_name(Season season);

}  // namespace walltherm
