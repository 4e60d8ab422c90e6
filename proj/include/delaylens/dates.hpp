#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace delaylens {

// Day-precision calendar date (proleptic Gregorian), stored as days since
// 1970-01-01. Value type, totally ordered.
class Date {
public:
    Date() = default;

    static Date from_days(std::int32_t days) { return Date(days); }
    static Date from_ymd(int year, unsigned month, unsigned day);

    // "YYYY-MM-DD". Throws DataError on malformed input or invalid calendar date.
    static Date parse(std::string_view iso);
    static std::optional<Date> try_parse(std::string_view iso);

    // Unix epoch seconds -> UTC calendar date.
    static Date from_unix_seconds(std::int64_t seconds);

    std::string to_string() const;

    std::int32_t days_since_epoch() const { return days_; }
    int year() const;
    unsigned month() const;
    unsigned day() const;

    // ISO weekday, Monday = 1 .. Sunday = 7.
    int weekday_iso() const;

    friend Date operator+(Date d, std::int32_t days) { return Date(d.days_ + days); }
    friend Date operator-(Date d, std::int32_t days) { return Date(d.days_ - days); }
    friend std::int32_t operator-(Date a, Date b) { return a.days_ - b.days_; }
    auto operator<=>(const Date&) const = default;

private:
    explicit Date(std::int32_t days) : days_(days) {}
    std::int32_t days_ = 0;
};

// ISO-8601 week (the week of the first Thursday rule).
struct IsoWeek {
    int year = 0;
    int week = 0;
    auto operator<=>(const IsoWeek&) const = default;
};

IsoWeek iso_week(Date d);

}  // namespace delaylens
