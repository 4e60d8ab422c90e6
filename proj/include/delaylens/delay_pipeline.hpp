#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "delaylens/event_model.hpp"

namespace delaylens {

// One newly reported event with its weekly reporting delay.
struct DelayRecord {
    std::string event_id;
    Date occurrence_date;     // T_i
    Date first_seen_date;     // R_i, earliest timestamp over all sightings
    int delay_weeks = 1;      // min(uncapped, d_max); censored records carry d_max
    bool censored = false;
    int uncapped_weeks = 1;   // kept so long-horizon survival curves stay computable
    std::string country;
    EventType event_type = EventType::Battles;
    std::string sub_event_type;
    std::int64_t fatalities = 0;
    std::string source;
    double latitude = 0.0;
    double longitude = 0.0;
};

enum class WinsorSide { Lower, Upper };

struct WinsorRule {
    std::string variable;
    WinsorSide side = WinsorSide::Upper;
    double percentile = 99.0;
};

std::vector<WinsorRule> default_winsor_rules();

struct CleaningConfig {
    int d_max = 20;
    int historical_delay_threshold = 40;
    int historical_batch_min = 100;
    int country_min_events = 10;
    std::vector<std::string> country_exclusions;
    std::vector<WinsorRule> winsor_rules = default_winsor_rules();
    // Events dated before the observation window but reported inside it are
    // kept by default; flip to study the window-only subset.
    bool include_pre_window_occurrences = true;
    // Countries absent from the reference counts are dropped (with a warning
    // surfaced by the caller) unless this is cleared.
    bool drop_missing_reference = true;
};

// Ids present in the release dated `release_date` and absent from all earlier
// releases. Sorted for reproducibility.
std::vector<std::string> diff_releases(const SnapshotStore& store, Date release_date);

// Week-count delay between occurrence and first sighting.
// delay = max(1, ceil((R - T)/7)) capped at d_max; censored iff it overflowed.
// Throws DataError when R <= T.
std::pair<int, bool> compute_delay(Date t, Date r, int d_max);

struct DelayReject {
    std::string event_id;
    std::string reason;
};

struct DelayDataset {
    std::vector<DelayRecord> records;  // sorted by (occurrence_date, event_id)
    std::vector<DelayReject> rejects;  // chronology violations, never silently dropped
};

// One DelayRecord per event first seen strictly after the baseline release
// (dated exactly window_start) and at or before window_end. Attributes come
// from the first sighting; R_i is the earliest timestamp over sightings up to
// window_end. Throws UsageError when the store is empty or lacks the baseline.
DelayDataset build_delay_dataset(const SnapshotStore& store, Date window_start, Date window_end,
                                 const CleaningConfig& config);

struct RemovedBatch {
    Date first_seen;
    std::string country;
    std::string source;
    std::size_t size = 0;              // records removed (whole group)
    std::size_t long_delay_count = 0;  // of which exceeded the threshold
};

struct HistoricalFilterResult {
    std::vector<DelayRecord> kept;
    std::vector<RemovedBatch> removed;  // sorted by (first_seen, country, source)
};

// Drops every record of any (first_seen, country, source) group containing at
// least `historical_batch_min` records with uncapped delay strictly above
// `historical_delay_threshold` weeks.
HistoricalFilterResult filter_historical_batches(const std::vector<DelayRecord>& records,
                                                 const CleaningConfig& config);

struct CountryFilterResult {
    std::vector<DelayRecord> kept;
    std::map<std::string, std::size_t> dropped_by_country;
    std::vector<std::string> missing_reference;  // countries absent from the counts
};

// Keeps records whose country has reference count >= country_min_events and is
// not explicitly excluded. Counts come from a fully reported reference period.
CountryFilterResult filter_countries(const std::vector<DelayRecord>& records,
                                     const std::map<std::string, std::size_t>& reference_counts,
                                     const CleaningConfig& config);

// Distinct events (first sightings) per country whose occurrence date falls in
// `year`, over releases up to `as_of`. Feeds filter_countries.
std::map<std::string, std::size_t> reference_year_counts(const SnapshotStore& store, int year,
                                                         Date as_of);

// Percentile by linear interpolation between order statistics at rank
// 1 + (n-1)*p/100 (1-based). Throws UsageError on empty input or p outside
// (0, 100).
double percentile_interpolated(std::vector<double> values, double p);

// Clamps values beyond the threshold on the given side to the threshold.
std::vector<double> winsorize_at(const std::vector<double>& values, WinsorSide side, double q);

// Computes the percentile once, then clamps. The threshold is a fixed function
// of the input, so reapplying the same rule to the output changes nothing.
std::vector<double> winsorize(const std::vector<double>& values, WinsorSide side, double p);

// delays.csv round-trip. Columns: event_id,event_date,first_seen,delay_weeks,
// censored,country,event_type,sub_event_type,fatalities,source,lat,lon.
std::string format_delays_csv(const std::vector<DelayRecord>& records);
std::vector<DelayRecord> parse_delays_csv(std::string_view content);

}  // namespace delaylens
