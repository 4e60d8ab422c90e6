#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "delaylens/dates.hpp"

namespace delaylens {

// The six event categories used throughout.
enum class EventType : std::uint8_t {
    Battles = 0,
    ExplosionsRemoteViolence,
    Protests,
    Riots,
    StrategicDevelopments,
    ViolenceAgainstCivilians,
};

inline constexpr int kNumEventTypes = 6;

std::string_view to_string(EventType t);
std::optional<EventType> event_type_from_string(std::string_view s);
std::array<EventType, kNumEventTypes> all_event_types();

// One row of a dated dataset release.
struct EventRecord {
    std::string event_id;
    Date event_date;
    std::string country;
    double latitude = 0.0;
    double longitude = 0.0;
    EventType event_type = EventType::Battles;
    std::string sub_event_type;
    std::int64_t fatalities = 0;
    std::string source;
    // Last-modification date upstream; may legitimately precede event_date in
    // dirty data (tolerated here, rejected at delay computation).
    Date timestamp_date;
};

struct SnapshotRelease {
    Date release_date;
    std::vector<EventRecord> records;
};

// A data row that failed field validation. Row numbers are 1-based over data
// rows (header excluded).
struct RowReject {
    std::size_t row = 0;
    std::string field;
    std::string reason;
};

struct ParseResult {
    SnapshotRelease release;
    std::vector<RowReject> rejects;
};

// Parses delimited text (comma or pipe, detected from the header) into a
// release. Rows failing validation land in `rejects`, never silently dropped.
// Throws DataError for schema-level problems: missing required columns or
// duplicate event ids.
ParseResult parse_snapshot(std::string_view content, Date release_date);

// Earliest sighting of an event id across the release sequence.
struct FirstSeen {
    Date first_release;
    Date timestamp;  // earliest timestamp_date over all sightings
};

using FirstSeenIndex = std::unordered_map<std::string, FirstSeen>;

// Ordered sequence of releases plus the first-appearance index. Append is
// single-writer; a fully built store is immutable and freely shareable.
class SnapshotStore {
public:
    // Throws DataError unless release.release_date > the last stored one.
    void append_release(SnapshotRelease release);

    const std::vector<SnapshotRelease>& releases() const { return releases_; }
    const FirstSeenIndex& index() const { return index_; }
    bool empty() const { return releases_.empty(); }

    const SnapshotRelease* find_release(Date release_date) const;

    // Index rebuilt from scratch; must equal the incrementally maintained one.
    static FirstSeenIndex build_index(const std::vector<SnapshotRelease>& releases);

private:
    std::vector<SnapshotRelease> releases_;
    FirstSeenIndex index_;
};

// --- On-disk layout: <dir>/releases/<YYYY-MM-DD>.csv + <dir>/index.json ---

// Validates `content`, appends it as-received under releases/, and updates
// index.json. Returns the rejects report. With strict=true any reject is
// escalated to DataError.
std::vector<RowReject> store_ingest(const std::filesystem::path& dir, std::string_view content,
                                    Date release_date, bool strict = false);

SnapshotStore store_load(const std::filesystem::path& dir);

// Reads index.json without touching the raw releases.
FirstSeenIndex store_read_index(const std::filesystem::path& dir,
                                std::vector<Date>* release_dates = nullptr);

}  // namespace delaylens
