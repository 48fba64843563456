#include <doctest.h>

#include "walltherm/errors.hpp"
#include "walltherm/timeutil.hpp"

using namespace walltherm;

TEST_SUITE("timeutil") {

TEST_CASE("civil round trips through epoch days") {
  for (int year : {1970, 1999, 2000, 2023, 2024, 2100}) {
    for (int month : {1, 2, 6, 12}) {
      const CivilDate date{year, month, 15};
      CHECK(civil_from_days(days_from_civil(date)) == date);
    }
  }
  CHECK(days_from_civil(CivilDate{1970, 1, 1}) == 0);
  CHECK(epoch_from_civil(CivilDate{2023, 6, 1}) == 1685577600);
}

TEST_CASE("leap years handled") {
  CHECK(days_from_civil(CivilDate{2024, 3, 1}) - days_from_civil(CivilDate{2024, 2, 1}) == 29);
  CHECK(days_from_civil(CivilDate{2023, 3, 1}) - days_from_civil(CivilDate{2023, 2, 1}) == 28);
  CHECK(days_from_civil(CivilDate{2100, 3, 1}) - days_from_civil(CivilDate{2100, 2, 1}) == 28);
}

TEST_CASE("iso8601 parsing") {
  CHECK(parse_iso8601("2023-06-01T00:00:00Z") == 1685577600);
  CHECK(parse_iso8601("2023-06-01T12:30:00Z") == 1685577600 + 12 * 3600 + 30 * 60);
  CHECK(parse_iso8601("2023-06-01T12:30:00+02:00") == 1685577600 + 12 * 3600 + 30 * 60 - 7200);
  CHECK(parse_iso8601("2023-06-01T12:30:00-01:30") ==
        1685577600 + 12 * 3600 + 30 * 60 + 5400);
  CHECK(parse_iso8601("2023-06-01T12:30:00") == parse_iso8601("2023-06-01T12:30:00Z"));
  CHECK(parse_iso8601("2023-06-01 12:30:00Z") == parse_iso8601("2023-06-01T12:30:00Z"));
  CHECK(parse_iso8601("2023-06-01T12:30:00.750Z") == parse_iso8601("2023-06-01T12:30:00Z"));
  CHECK(parse_iso8601("2024-02-29T00:00:00Z") ==
        epoch_from_civil(CivilDate{2024, 2, 29}));
}

TEST_CASE("iso8601 rejects malformed input") {
  CHECK_THROWS_AS(parse_iso8601("2023-02-29T00:00:00Z"), DataError);
  CHECK_THROWS_AS(parse_iso8601("2023-13-01T00:00:00Z"), DataError);
  CHECK_THROWS_AS(parse_iso8601("2023-06-01X12:00:00"), DataError);
  CHECK_THROWS_AS(parse_iso8601("2023-06-01T25:00:00Z"), DataError);
  CHECK_THROWS_AS(parse_iso8601("garbage"), DataError);
  CHECK_THROWS_AS(parse_iso8601(""), DataError);
}

TEST_CASE("iso8601 formatting round trips") {
  for (std::int64_t epoch : {0LL, 1685577600LL, 1685620230LL, 4102444799LL}) {
    CHECK(parse_iso8601(format_iso8601_utc(epoch)) == epoch);
  }
  CHECK(format_iso8601_utc(1685577600) == "2023-06-01T00:00:00Z");
}

TEST_CASE("date parsing and formatting") {
  CHECK(parse_date("2023-06-01") == CivilDate{2023, 6, 1});
  CHECK(format_date(CivilDate{2023, 6, 1}) == "2023-06-01");
  CHECK_THROWS_AS(parse_date("2023-6-1"), DataError);
  CHECK_THROWS_AS(parse_date("2023-02-30"), DataError);
  CHECK_THROWS_AS(parse_date("01-06-2023"), DataError);
}

TEST_CASE("meteorological seasons") {
  CHECK(season_of(CivilDate{2023, 12, 5}) == Season::winter);
  CHECK(season_of(CivilDate{2023, 1, 5}) == Season::winter);
  CHECK(season_of(CivilDate{2023, 2, 28}) == Season::winter);
  CHECK(season_of(CivilDate{2023, 3, 1}) == Season::spring);
  CHECK(season_of(CivilDate{2023, 5, 31}) == Season::spring);
  CHECK(season_of(CivilDate{2023, 6, 1}) == Season::summer);
  CHECK(season_of(CivilDate{2023, 8, 15}) == Season::summer);
  CHECK(season_of(CivilDate{2023, 9, 1}) == Season::fall);
  CHECK(season_of(CivilDate{2023, 11, 30}) == Season::fall);
  CHECK(season_name(Season::winter) == std::string("winter"));
  CHECK(season_name(Season::fall) == std::string("fall"));
}

TEST_CASE("second of day") {
  CHECK(second_of_day(1685577600) == 0);
  CHECK(second_of_day(1685577600 + 3661) == 3661);
}

}  // TEST_SUITE
