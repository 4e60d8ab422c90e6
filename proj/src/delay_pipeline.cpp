#include "delaylens/delay_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "delaylens/csv.hpp"
#include "delaylens/errors.hpp"

namespace delaylens {

std::vector<WinsorRule> default_winsor_rules() {
    return {
        {"logDISTANCE", WinsorSide::Upper, 99.0},
        {"logPOP50km", WinsorSide::Lower, 1.0},
        {"logGDP", WinsorSide::Lower, 5.0},
    };
}

std::vector<std::string> diff_releases(const SnapshotStore& store, Date release_date) {
    const SnapshotRelease* target = store.find_release(release_date);
    if (target == nullptr) {
        throw UsageError("no release dated " + release_date.to_string() + " in the store");
    }
    std::unordered_set<std::string> earlier;
    for (const auto& rel : store.releases()) {
        if (!(rel.release_date < release_date)) continue;
        for (const auto& rec : rel.records) earlier.insert(rec.event_id);
    }
    std::vector<std::string> fresh;
    for (const auto& rec : target->records) {
        if (!earlier.contains(rec.event_id)) fresh.push_back(rec.event_id);
    }
    std::sort(fresh.begin(), fresh.end());
    return fresh;
}

std::pair<int, bool> compute_delay(Date t, Date r, int d_max) {
    const std::int64_t days = r - t;
    if (days <= 0) {
        throw DataError("event reported on or before its occurrence: occurrence " + t.to_string() +
                        ", first seen " + r.to_string());
    }
    const std::int64_t uncapped = std::max<std::int64_t>(1, (days + 6) / 7);
    const bool censored = uncapped > d_max;
    return {static_cast<int>(censored ? d_max : uncapped), censored};
}

DelayDataset build_delay_dataset(const SnapshotStore& store, Date window_start, Date window_end,
                                 const CleaningConfig& config) {
    if (store.empty()) throw UsageError("snapshot store is empty");
    if (store.find_release(window_start) == nullptr) {
        throw UsageError("store has no baseline release dated " + window_start.to_string());
    }
    if (!(window_start < window_end)) {
        throw UsageError("window end must follow the baseline release date");
    }

    // First sighting and earliest timestamp restricted to releases up to the
    // window end; the store may extend past it.
    struct Sighting {
        Date first_release;
        Date timestamp;
        const EventRecord* record;  // from the first sighting
    };
    std::unordered_map<std::string, Sighting> sightings;
    for (const auto& rel : store.releases()) {
        if (window_end < rel.release_date) continue;
        for (const auto& rec : rel.records) {
            auto it = sightings.find(rec.event_id);
            if (it == sightings.end()) {
                sightings.emplace(rec.event_id, Sighting{rel.release_date, rec.timestamp_date, &rec});
            } else if (rec.timestamp_date < it->second.timestamp) {
                it->second.timestamp = rec.timestamp_date;
            }
        }
    }

    DelayDataset out;
    for (const auto& [id, s] : sightings) {
        if (!(window_start < s.first_release)) continue;  // pre-existing at baseline
        const EventRecord& rec = *s.record;
        if (!config.include_pre_window_occurrences && rec.event_date < window_start) continue;

        DelayRecord d;
        d.event_id = id;
        d.occurrence_date = rec.event_date;
        d.first_seen_date = s.timestamp;
        const std::int64_t days = d.first_seen_date - d.occurrence_date;
        if (days <= 0) {
            out.rejects.push_back({id, "first seen " + d.first_seen_date.to_string() +
                                           " on or before occurrence " +
                                           d.occurrence_date.to_string()});
            continue;
        }
        auto [weeks, cens] = compute_delay(d.occurrence_date, d.first_seen_date, config.d_max);
        d.delay_weeks = weeks;
        d.censored = cens;
        d.uncapped_weeks = static_cast<int>(std::max<std::int64_t>(1, (days + 6) / 7));
        d.country = rec.country;
        d.event_type = rec.event_type;
        d.sub_event_type = rec.sub_event_type;
        d.fatalities = rec.fatalities;
        d.source = rec.source;
        d.latitude = rec.latitude;
        d.longitude = rec.longitude;
        out.records.push_back(std::move(d));
    }

    auto by_date_id = [](const DelayRecord& a, const DelayRecord& b) {
        return std::tie(a.occurrence_date, a.event_id) < std::tie(b.occurrence_date, b.event_id);
    };
    std::sort(out.records.begin(), out.records.end(), by_date_id);
    std::sort(out.rejects.begin(), out.rejects.end(),
              [](const DelayReject& a, const DelayReject& b) { return a.event_id < b.event_id; });
    return out;
}

HistoricalFilterResult filter_historical_batches(const std::vector<DelayRecord>& records,
                                                 const CleaningConfig& config) {
    using Key = std::tuple<Date, std::string, std::string>;
    std::map<Key, std::pair<std::size_t, std::size_t>> groups;  // size, long-delay count
    for (const auto& r : records) {
        auto& g = groups[{r.first_seen_date, r.country, r.source}];
        ++g.first;
        if (r.uncapped_weeks > config.historical_delay_threshold) ++g.second;
    }

    std::set<Key> doomed;
    HistoricalFilterResult result;
    for (const auto& [key, counts] : groups) {
        if (counts.second >= static_cast<std::size_t>(config.historical_batch_min)) {
            doomed.insert(key);
            result.removed.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key),
                                      counts.first, counts.second});
        }
    }
    result.kept.reserve(records.size());
    for (const auto& r : records) {
        if (!doomed.contains({r.first_seen_date, r.country, r.source})) result.kept.push_back(r);
    }
    return result;
}

CountryFilterResult filter_countries(const std::vector<DelayRecord>& records,
                                     const std::map<std::string, std::size_t>& reference_counts,
                                     const CleaningConfig& config) {
    std::unordered_set<std::string> excluded(config.country_exclusions.begin(),
                                             config.country_exclusions.end());
    std::unordered_set<std::string> missing_seen;
    CountryFilterResult result;
    result.kept.reserve(records.size());
    for (const auto& r : records) {
        bool keep = true;
        if (excluded.contains(r.country)) {
            keep = false;
        } else {
            auto it = reference_counts.find(r.country);
            if (it == reference_counts.end()) {
                if (missing_seen.insert(r.country).second) {
                    result.missing_reference.push_back(r.country);
                }
                keep = !config.drop_missing_reference;
            } else {
                keep = it->second >= static_cast<std::size_t>(config.country_min_events);
            }
        }
        if (keep) {
            result.kept.push_back(r);
        } else {
            ++result.dropped_by_country[r.country];
        }
    }
    std::sort(result.missing_reference.begin(), result.missing_reference.end());
    return result;
}

std::map<std::string, std::size_t> reference_year_counts(const SnapshotStore& store, int year,
                                                         Date as_of) {
    std::unordered_set<std::string> seen;
    std::map<std::string, std::size_t> counts;
    for (const auto& rel : store.releases()) {
        if (as_of < rel.release_date) continue;
        for (const auto& rec : rel.records) {
            if (!seen.insert(rec.event_id).second) continue;
            if (rec.event_date.year() == year) ++counts[rec.country];
        }
    }
    return counts;
}

double percentile_interpolated(std::vector<double> values, double p) {
    if (values.empty()) throw UsageError("percentile of an empty vector");
    if (!(p > 0.0) || !(p < 100.0)) throw UsageError("percentile must lie in (0, 100)");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double rank = 1.0 + (static_cast<double>(n) - 1.0) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    if (hi > n || lo == hi) return values[lo - 1];
    return values[lo - 1] + frac * (values[hi - 1] - values[lo - 1]);
}

std::vector<double> winsorize_at(const std::vector<double>& values, WinsorSide side, double q) {
    std::vector<double> out = values;
    for (double& v : out) {
        if (side == WinsorSide::Upper ? v > q : v < q) v = q;
    }
    return out;
}

std::vector<double> winsorize(const std::vector<double>& values, WinsorSide side, double p) {
    if (values.empty()) throw UsageError("winsorize of an empty vector");
    return winsorize_at(values, side, percentile_interpolated(values, p));
}

std::string format_delays_csv(const std::vector<DelayRecord>& records) {
    std::ostringstream out;
    out << "event_id,event_date,first_seen,delay_weeks,censored,country,event_type,"
           "sub_event_type,fatalities,source,lat,lon\n";
    for (const auto& r : records) {
        write_csv_row(out,
                      {r.event_id, r.occurrence_date.to_string(), r.first_seen_date.to_string(),
                       std::to_string(r.delay_weeks), r.censored ? "1" : "0", r.country,
                       std::string(to_string(r.event_type)), r.sub_event_type,
                       std::to_string(r.fatalities), r.source, format_double(r.latitude),
                       format_double(r.longitude)},
                      ',');
    }
    return std::move(out).str();
}

std::vector<DelayRecord> parse_delays_csv(std::string_view content) {
    CsvTable t = parse_csv(std::string(content), ',');
    const int c_id = t.require_column("event_id");
    const int c_date = t.require_column("event_date");
    const int c_seen = t.require_column("first_seen");
    const int c_weeks = t.require_column("delay_weeks");
    const int c_cens = t.require_column("censored");
    const int c_country = t.require_column("country");
    const int c_type = t.require_column("event_type");
    const int c_sub = t.require_column("sub_event_type");
    const int c_fat = t.require_column("fatalities");
    const int c_src = t.require_column("source");
    const int c_lat = t.require_column("lat");
    const int c_lon = t.require_column("lon");

    std::vector<DelayRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        auto fail = [&](const std::string& what) {
            throw DataError("delays row " + std::to_string(i + 1) + ": " + what);
        };
        if (row.size() != t.header.size()) fail("wrong field count");
        DelayRecord r;
        r.event_id = row[static_cast<std::size_t>(c_id)];
        r.occurrence_date = Date::parse(row[static_cast<std::size_t>(c_date)]);
        r.first_seen_date = Date::parse(row[static_cast<std::size_t>(c_seen)]);
        r.delay_weeks = std::stoi(row[static_cast<std::size_t>(c_weeks)]);
        const std::string& cens = row[static_cast<std::size_t>(c_cens)];
        if (cens == "1" || cens == "true") {
            r.censored = true;
        } else if (cens == "0" || cens == "false") {
            r.censored = false;
        } else {
            fail("censored flag '" + cens + "' is not 0/1/true/false");
        }
        const std::int64_t days = r.first_seen_date - r.occurrence_date;
        if (days <= 0) fail("first_seen on or before event_date");
        r.uncapped_weeks = static_cast<int>(std::max<std::int64_t>(1, (days + 6) / 7));
        r.country = row[static_cast<std::size_t>(c_country)];
        auto type = event_type_from_string(row[static_cast<std::size_t>(c_type)]);
        if (!type) fail("unknown event_type '" + row[static_cast<std::size_t>(c_type)] + "'");
        r.event_type = *type;
        r.sub_event_type = row[static_cast<std::size_t>(c_sub)];
        r.fatalities = std::stoll(row[static_cast<std::size_t>(c_fat)]);
        r.source = row[static_cast<std::size_t>(c_src)];
        r.latitude = std::stod(row[static_cast<std::size_t>(c_lat)]);
        r.longitude = std::stod(row[static_cast<std::size_t>(c_lon)]);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace delaylens
