#include "delaylens/dates.hpp"

#include "delaylens/errors.hpp"

namespace delaylens {

namespace {

namespace chr = std::chrono;

chr::year_month_day to_ymd(std::int32_t days) {
    return chr::year_month_day(chr::sys_days(chr::days(days)));
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    chr::year_month_day ymd{chr::year(year), chr::month(month), chr::day(day)};
    if (!ymd.ok())
        throw DataError("invalid calendar date: " + std::to_string(year) + "-" +
                        std::to_string(month) + "-" + std::to_string(day));
    return Date(static_cast<std::int32_t>(chr::sys_days(ymd).time_since_epoch().count()));
}

std::optional<Date> Date::try_parse(std::string_view iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
    int year = (iso[0] - '0') * 1000 + (iso[1] - '0') * 100 + (iso[2] - '0') * 10 + (iso[3] - '0');
    unsigned month = static_cast<unsigned>((iso[5] - '0') * 10 + (iso[6] - '0'));
    unsigned day = static_cast<unsigned>((iso[8] - '0') * 10 + (iso[9] - '0'));
    chr::year_month_day ymd{chr::year(year), chr::month(month), chr::day(day)};
    if (!ymd.ok()) return std::nullopt;
    return Date(static_cast<std::int32_t>(chr::sys_days(ymd).time_since_epoch().count()));
}

Date Date::parse(std::string_view iso) {
    auto d = try_parse(iso);
    if (!d) throw DataError("unparseable date (expected YYYY-MM-DD): '" + std::string(iso) + "'");
    return *d;
}

Date Date::from_unix_seconds(std::int64_t seconds) {
    std::int64_t days = seconds / 86400;
    if (seconds < 0 && seconds % 86400 != 0) --days;  // floor toward past
    return Date(static_cast<std::int32_t>(days));
}

std::string Date::to_string() const {
    auto ymd = to_ymd(days_);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

int Date::year() const { return static_cast<int>(to_ymd(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(days_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(days_).day()); }

int Date::weekday_iso() const {
    chr::weekday wd{chr::sys_days(chr::days(days_))};
    return static_cast<int>(wd.iso_encoding());
}

IsoWeek iso_week(Date d) {
    // The ISO week of a date is the calendar week of its nearest Thursday.
    Date thursday = d + (4 - d.weekday_iso());
    Date jan1 = Date::from_ymd(thursday.year(), 1, 1);
    int ordinal = (thursday - jan1) + 1;
    return IsoWeek{thursday.year(), (ordinal - 1) / 7 + 1};
}

}  // namespace delaylens
