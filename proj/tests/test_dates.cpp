#include <doctest.h>

#include "delaylens/dates.hpp"
#include "delaylens/errors.hpp"

using namespace delaylens;

TEST_CASE("date parse and format round-trip") {
    const char* samples[] = {"1970-01-01", "1999-12-31", "2000-02-29", "2023-01-01",
                             "2024-02-29", "2024-12-30", "2026-08-17"};
    for (const char* s : samples) {
        Date d = Date::parse(s);
        CHECK(d.to_string() == s);
    }
    CHECK(Date::parse("1970-01-01").days_since_epoch() == 0);
    CHECK(Date::parse("1970-01-02").days_since_epoch() == 1);
    CHECK(Date::parse("1969-12-31").days_since_epoch() == -1);
}

TEST_CASE("date parse rejects malformed input") {
    CHECK(!Date::try_parse("").has_value());
    CHECK(!Date::try_parse("2023-1-01").has_value());
    CHECK(!Date::try_parse("2023/01/01").has_value());
    CHECK(!Date::try_parse("2023-13-01").has_value());
    CHECK(!Date::try_parse("2023-02-29").has_value());
    CHECK(!Date::try_parse("2023-01-01 ").has_value());
    CHECK(!Date::try_parse("20230101").has_value());
    CHECK_THROWS_AS(Date::parse("not-a-date"), DataError);
}

TEST_CASE("date arithmetic and ordering") {
    Date a = Date::parse("2023-03-01");
    CHECK((a + 31).to_string() == "2023-04-01");
    CHECK((a - 1).to_string() == "2023-02-28");
    CHECK(Date::parse("2024-03-01") - Date::parse("2024-02-28") == 2);
    CHECK(Date::parse("2023-01-01") < Date::parse("2023-01-02"));
}

TEST_CASE("unix seconds map to UTC dates, flooring toward the past") {
    CHECK(Date::from_unix_seconds(0).to_string() == "1970-01-01");
    CHECK(Date::from_unix_seconds(86399).to_string() == "1970-01-01");
    CHECK(Date::from_unix_seconds(86400).to_string() == "1970-01-02");
    CHECK(Date::from_unix_seconds(-1).to_string() == "1969-12-31");
    // 2023-06-15 12:00:00 UTC
    CHECK(Date::from_unix_seconds(1686830400).to_string() == "2023-06-15");
}

TEST_CASE("iso weekday") {
    CHECK(Date::parse("2024-01-01").weekday_iso() == 1);  // Monday
    CHECK(Date::parse("2024-01-07").weekday_iso() == 7);  // Sunday
    CHECK(Date::parse("1970-01-01").weekday_iso() == 4);  // Thursday
}

TEST_CASE("iso week numbering handles year boundaries") {
    auto wk = [](const char* s) { return iso_week(Date::parse(s)); };
    CHECK(wk("2023-01-01").year == 2022);
    CHECK(wk("2023-01-01").week == 52);
    CHECK(wk("2023-01-02").year == 2023);
    CHECK(wk("2023-01-02").week == 1);
    CHECK(wk("2020-12-31").year == 2020);
    CHECK(wk("2020-12-31").week == 53);
    CHECK(wk("2021-01-01").year == 2020);
    CHECK(wk("2021-01-01").week == 53);
    CHECK(wk("2024-12-30").year == 2025);
    CHECK(wk("2024-12-30").week == 1);
    CHECK(wk("2016-01-01").year == 2015);
    CHECK(wk("2016-01-01").week == 53);
}
