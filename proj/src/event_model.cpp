#include "delaylens/event_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "delaylens/csv.hpp"
#include "delaylens/errors.hpp"

namespace delaylens {

namespace {

constexpr std::string_view kTypeNames[kNumEventTypes] = {
    "Battles",
    "Explosions/Remote violence",
    "Protests",
    "Riots",
    "Strategic developments",
    "Violence against civilians",
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool parse_double_field(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

bool parse_int_field(std::string_view s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::string_view to_string(EventType t) { return kTypeNames[static_cast<int>(t)]; }

std::optional<EventType> event_type_from_string(std::string_view s) {
    for (int i = 0; i < kNumEventTypes; ++i) {
        if (s == kTypeNames[i]) return static_cast<EventType>(i);
    }
    return std::nullopt;
}

std::array<EventType, kNumEventTypes> all_event_types() {
    std::array<EventType, kNumEventTypes> out{};
    for (int i = 0; i < kNumEventTypes; ++i) out[static_cast<std::size_t>(i)] = static_cast<EventType>(i);
    return out;
}

ParseResult parse_snapshot(std::string_view content, Date release_date) {
    CsvTable table = parse_csv_auto(content);
    const int c_id = table.require_column("event_id_cnty");
    const int c_date = table.require_column("event_date");
    const int c_country = table.require_column("country");
    const int c_lat = table.require_column("latitude");
    const int c_lon = table.require_column("longitude");
    const int c_type = table.require_column("event_type");
    const int c_sub = table.require_column("sub_event_type");
    const int c_fat = table.require_column("fatalities");
    const int c_src = table.require_column("source");
    const int c_ts = table.require_column("timestamp");

    ParseResult result;
    result.release.release_date = release_date;
    result.release.records.reserve(table.rows.size());

    const std::size_t ncols = table.header.size();
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::string> dup_ids;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t rowno = r + 1;
        auto reject = [&](const char* field, std::string reason) {
            result.rejects.push_back({rowno, field, std::move(reason)});
        };
        if (row.size() != ncols) {
            reject("", "expected " + std::to_string(ncols) + " fields, got " +
                           std::to_string(row.size()));
            continue;
        }

        EventRecord rec;
        rec.event_id = trim(row[static_cast<std::size_t>(c_id)]);
        if (rec.event_id.empty()) {
            reject("event_id_cnty", "empty event id");
            continue;
        }

        std::string_view date_s = trim(row[static_cast<std::size_t>(c_date)]);
        if (auto d = Date::try_parse(date_s)) {
            rec.event_date = *d;
        } else {
            reject("event_date", "unparseable date '" + std::string(date_s) + "'");
            continue;
        }

        rec.country = trim(row[static_cast<std::size_t>(c_country)]);

        std::string_view lat_s = trim(row[static_cast<std::size_t>(c_lat)]);
        if (!parse_double_field(lat_s, rec.latitude) || rec.latitude < -90.0 ||
            rec.latitude > 90.0) {
            reject("latitude", "'" + std::string(lat_s) + "' not in [-90, 90]");
            continue;
        }
        std::string_view lon_s = trim(row[static_cast<std::size_t>(c_lon)]);
        if (!parse_double_field(lon_s, rec.longitude) || rec.longitude < -180.0 ||
            rec.longitude > 180.0) {
            reject("longitude", "'" + std::string(lon_s) + "' not in [-180, 180]");
            continue;
        }

        std::string_view type_s = trim(row[static_cast<std::size_t>(c_type)]);
        if (auto t = event_type_from_string(type_s)) {
            rec.event_type = *t;
        } else {
            reject("event_type", "unknown category '" + std::string(type_s) + "'");
            continue;
        }
        rec.sub_event_type = trim(row[static_cast<std::size_t>(c_sub)]);

        std::string_view fat_s = trim(row[static_cast<std::size_t>(c_fat)]);
        if (!parse_int_field(fat_s, rec.fatalities) || rec.fatalities < 0) {
            reject("fatalities", "'" + std::string(fat_s) + "' is not a nonnegative integer");
            continue;
        }

        rec.source = trim(row[static_cast<std::size_t>(c_src)]);

        std::string_view ts_s = trim(row[static_cast<std::size_t>(c_ts)]);
        if (auto d = Date::try_parse(ts_s)) {
            rec.timestamp_date = *d;
        } else if (all_digits(ts_s)) {
            std::int64_t secs = 0;
            if (!parse_int_field(ts_s, secs)) {
                reject("timestamp", "epoch value '" + std::string(ts_s) + "' out of range");
                continue;
            }
            rec.timestamp_date = Date::from_unix_seconds(secs);
        } else {
            reject("timestamp", "'" + std::string(ts_s) +
                                    "' is neither an ISO date nor epoch seconds");
            continue;
        }

        auto [it, inserted] = seen.emplace(rec.event_id, rowno);
        if (!inserted) {
            if (dup_ids.size() < 8) dup_ids.push_back(rec.event_id);
            else if (dup_ids.size() == 8) dup_ids.push_back("...");
            continue;
        }
        result.release.records.push_back(std::move(rec));
    }

    if (!dup_ids.empty()) {
        std::string msg = "duplicate event ids within release " + release_date.to_string() + ":";
        for (const auto& id : dup_ids) msg += " " + id;
        throw DataError(msg);
    }
    return result;
}

void SnapshotStore::append_release(SnapshotRelease release) {
    if (!releases_.empty() && !(releases_.back().release_date < release.release_date)) {
        throw DataError("release dates must be strictly increasing: " +
                        release.release_date.to_string() + " does not follow " +
                        releases_.back().release_date.to_string());
    }
    for (const auto& rec : release.records) {
        auto it = index_.find(rec.event_id);
        if (it == index_.end()) {
            index_.emplace(rec.event_id, FirstSeen{release.release_date, rec.timestamp_date});
        } else if (rec.timestamp_date < it->second.timestamp) {
            // Later releases can carry an earlier last-modified date for the
            // same event; the earliest one wins.
            it->second.timestamp = rec.timestamp_date;
        }
    }
    releases_.push_back(std::move(release));
}

const SnapshotRelease* SnapshotStore::find_release(Date release_date) const {
    for (const auto& rel : releases_) {
        if (rel.release_date == release_date) return &rel;
    }
    return nullptr;
}

FirstSeenIndex SnapshotStore::build_index(const std::vector<SnapshotRelease>& releases) {
    SnapshotStore tmp;
    FirstSeenIndex idx;
    for (const auto& rel : releases) {
        for (const auto& rec : rel.records) {
            auto it = idx.find(rec.event_id);
            if (it == idx.end()) {
                idx.emplace(rec.event_id, FirstSeen{rel.release_date, rec.timestamp_date});
            } else if (rec.timestamp_date < it->second.timestamp) {
                it->second.timestamp = rec.timestamp_date;
            }
        }
    }
    return idx;
}

namespace {

namespace fs = std::filesystem;

void write_index_file(const fs::path& dir, const std::vector<Date>& release_dates,
                      const FirstSeenIndex& index) {
    nlohmann::json j;
    auto& rels = j["releases"] = nlohmann::json::array();
    for (const Date& d : release_dates) rels.push_back(d.to_string());
    auto& events = j["events"] = nlohmann::json::object();
    // nlohmann objects iterate in key order, so the dump is deterministic.
    for (const auto& [id, fs_entry] : index) {
        events[id] = {{"first_release", fs_entry.first_release.to_string()},
                      {"timestamp", fs_entry.timestamp.to_string()}};
    }
    std::ofstream out(dir / "index.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "index.json").string());
    out << j.dump(1) << '\n';
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

}  // namespace

FirstSeenIndex store_read_index(const std::filesystem::path& dir,
                                std::vector<Date>* release_dates) {
    const fs::path idx_path = dir / "index.json";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(idx_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed " + idx_path.string() + ": " + e.what());
    }
    if (release_dates) {
        release_dates->clear();
        for (const auto& s : j.at("releases")) {
            release_dates->push_back(Date::parse(s.get<std::string>()));
        }
    }
    FirstSeenIndex index;
    for (const auto& [id, entry] : j.at("events").items()) {
        index.emplace(id, FirstSeen{Date::parse(entry.at("first_release").get<std::string>()),
                                    Date::parse(entry.at("timestamp").get<std::string>())});
    }
    return index;
}

std::vector<RowReject> store_ingest(const std::filesystem::path& dir, std::string_view content,
                                    Date release_date, bool strict) {
    ParseResult parsed = parse_snapshot(content, release_date);
    if (strict && !parsed.rejects.empty()) {
        const auto& r = parsed.rejects.front();
        throw DataError("release " + release_date.to_string() + ": " +
                        std::to_string(parsed.rejects.size()) + " row(s) rejected; first: row " +
                        std::to_string(r.row) + " field " + r.field + ": " + r.reason);
    }

    std::vector<Date> release_dates;
    FirstSeenIndex index;
    if (fs::exists(dir / "index.json")) {
        index = store_read_index(dir, &release_dates);
    }
    if (!release_dates.empty() && !(release_dates.back() < release_date)) {
        throw DataError("release dates must be strictly increasing: " +
                        release_date.to_string() + " does not follow " +
                        release_dates.back().to_string());
    }

    for (const auto& rec : parsed.release.records) {
        auto it = index.find(rec.event_id);
        if (it == index.end()) {
            index.emplace(rec.event_id, FirstSeen{release_date, rec.timestamp_date});
        } else if (rec.timestamp_date < it->second.timestamp) {
            it->second.timestamp = rec.timestamp_date;
        }
    }
    release_dates.push_back(release_date);

    fs::create_directories(dir / "releases");
    const fs::path raw_path = dir / "releases" / (release_date.to_string() + ".csv");
    {
        std::ofstream out(raw_path, std::ios::binary);
        if (!out) throw DataError("cannot write " + raw_path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    write_index_file(dir, release_dates, index);
    return std::move(parsed.rejects);
}

SnapshotStore store_load(const std::filesystem::path& dir) {
    std::vector<Date> release_dates;
    store_read_index(dir, &release_dates);  // validates shape; dates drive the load order
    SnapshotStore store;
    for (const Date& d : release_dates) {
        const fs::path raw_path = dir / "releases" / (d.to_string() + ".csv");
        ParseResult parsed = parse_snapshot(read_file(raw_path), d);
        store.append_release(std::move(parsed.release));
    }
    return store;
}

}  // namespace delaylens
