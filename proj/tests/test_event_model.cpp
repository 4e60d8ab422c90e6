#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "delaylens/errors.hpp"
#include "delaylens/event_model.hpp"

using namespace delaylens;
namespace fs = std::filesystem;

namespace {

const char* kHeader =
    "event_id_cnty,event_date,country,latitude,longitude,event_type,sub_event_type,"
    "fatalities,source,timestamp\n";

std::string row(const std::string& id, const std::string& date, const std::string& country,
                const std::string& lat, const std::string& lon, const std::string& type,
                const std::string& fat, const std::string& ts) {
    return id + "," + date + "," + country + "," + lat + "," + lon + "," + type + ",Sub," + fat +
           ",Src," + ts + "\n";
}

fs::path fresh_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("snapshot parsing accepts valid rows and both timestamp forms") {
    std::string text = kHeader;
    text += row("AAA1", "2023-05-01", "Kenya", "1.25", "36.8", "Protests", "0", "2023-05-03");
    text += row("AAA2", "2023-05-02", "Kenya", "-1.3", "36.9", "Battles", "4", "1683158400");
    ParseResult pr = parse_snapshot(text, Date::parse("2023-06-30"));
    CHECK(pr.rejects.empty());
    REQUIRE(pr.release.records.size() == 2);
    CHECK(pr.release.records[0].timestamp_date.to_string() == "2023-05-03");
    CHECK(pr.release.records[1].timestamp_date.to_string() == "2023-05-04");
    CHECK(pr.release.records[1].event_type == EventType::Battles);
    CHECK(pr.release.records[1].fatalities == 4);
}

TEST_CASE("snapshot parsing rejects bad rows with field and reason") {
    std::string text = kHeader;
    text += row("", "2023-05-01", "Kenya", "1.0", "36.0", "Riots", "0", "2023-05-02");
    text += row("B1", "2023-02-30", "Kenya", "1.0", "36.0", "Riots", "0", "2023-05-02");
    text += row("B2", "2023-05-01", "Kenya", "91.0", "36.0", "Riots", "0", "2023-05-02");
    text += row("B3", "2023-05-01", "Kenya", "1.0", "-181.0", "Riots", "0", "2023-05-02");
    text += row("B4", "2023-05-01", "Kenya", "1.0", "36.0", "Skirmish", "0", "2023-05-02");
    text += row("B5", "2023-05-01", "Kenya", "1.0", "36.0", "Riots", "-1", "2023-05-02");
    text += row("B6", "2023-05-01", "Kenya", "1.0", "36.0", "Riots", "2.5", "2023-05-02");
    text += row("B7", "2023-05-01", "Kenya", "1.0", "36.0", "Riots", "0", "yesterday");
    text += row("OK", "2023-05-01", "Kenya", "1.0", "36.0", "Riots", "0", "2023-05-02");
    ParseResult pr = parse_snapshot(text, Date::parse("2023-06-30"));
    REQUIRE(pr.release.records.size() == 1);
    CHECK(pr.release.records[0].event_id == "OK");
    REQUIRE(pr.rejects.size() == 8);
    CHECK(pr.rejects[0].field == "event_id_cnty");
    CHECK(pr.rejects[1].field == "event_date");
    CHECK(pr.rejects[2].field == "latitude");
    CHECK(pr.rejects[3].field == "longitude");
    CHECK(pr.rejects[4].field == "event_type");
    CHECK(pr.rejects[5].field == "fatalities");
    CHECK(pr.rejects[6].field == "fatalities");
    CHECK(pr.rejects[7].field == "timestamp");
    CHECK(pr.rejects[1].row == 2);
}

TEST_CASE("boundary coordinates are accepted") {
    std::string text = kHeader;
    text += row("E1", "2023-05-01", "X", "90", "-180", "Riots", "0", "2023-05-02");
    text += row("E2", "2023-05-01", "X", "-90", "180", "Riots", "0", "2023-05-02");
    ParseResult pr = parse_snapshot(text, Date::parse("2023-06-30"));
    CHECK(pr.rejects.empty());
    CHECK(pr.release.records.size() == 2);
}

TEST_CASE("missing required column is a schema error") {
    std::string text =
        "event_id_cnty,event_date,country,latitude,longitude,event_type,sub_event_type,"
        "fatalities,source\nA,2023-05-01,X,1,2,Riots,S,0,Src\n";
    CHECK_THROWS_AS(parse_snapshot(text, Date::parse("2023-06-30")), DataError);
}

TEST_CASE("duplicate event ids within a release are a schema error") {
    std::string text = kHeader;
    text += row("DUP", "2023-05-01", "X", "1", "2", "Riots", "0", "2023-05-02");
    text += row("DUP", "2023-05-02", "X", "1", "2", "Riots", "0", "2023-05-03");
    CHECK_THROWS_AS(parse_snapshot(text, Date::parse("2023-06-30")), DataError);
}

TEST_CASE("pipe-delimited snapshots parse identically") {
    std::string text =
        "event_id_cnty|event_date|country|latitude|longitude|event_type|sub_event_type|"
        "fatalities|source|timestamp\n"
        "P1|2023-05-01|Kenya|1.25|36.8|Protests|Peaceful protest|0|Daily Nation|2023-05-03\n";
    ParseResult pr = parse_snapshot(text, Date::parse("2023-06-30"));
    CHECK(pr.rejects.empty());
    REQUIRE(pr.release.records.size() == 1);
    CHECK(pr.release.records[0].sub_event_type == "Peaceful protest");
}

TEST_CASE("store index tracks first sighting and earliest timestamp") {
    SnapshotStore store;
    SnapshotRelease r1{Date::parse("2023-06-30"), {}};
    EventRecord a;
    a.event_id = "A";
    a.event_date = Date::parse("2023-05-01");
    a.timestamp_date = Date::parse("2023-05-10");
    r1.records.push_back(a);
    store.append_release(r1);

    SnapshotRelease r2{Date::parse("2023-07-31"), {}};
    EventRecord a2 = a;  // same event republished with an earlier modification date
    a2.timestamp_date = Date::parse("2023-05-04");
    EventRecord b;
    b.event_id = "B";
    b.event_date = Date::parse("2023-07-02");
    b.timestamp_date = Date::parse("2023-07-03");
    r2.records.push_back(a2);
    r2.records.push_back(b);
    store.append_release(r2);

    const auto& idx = store.index();
    REQUIRE(idx.size() == 2);
    CHECK(idx.at("A").first_release.to_string() == "2023-06-30");
    CHECK(idx.at("A").timestamp.to_string() == "2023-05-04");
    CHECK(idx.at("B").first_release.to_string() == "2023-07-31");

    // Incremental maintenance equals a from-scratch rebuild.
    FirstSeenIndex rebuilt = SnapshotStore::build_index(store.releases());
    REQUIRE(rebuilt.size() == idx.size());
    for (const auto& [id, seen] : idx) {
        CHECK(rebuilt.at(id).first_release == seen.first_release);
        CHECK(rebuilt.at(id).timestamp == seen.timestamp);
    }
}

TEST_CASE("appending an out-of-order release fails") {
    SnapshotStore store;
    store.append_release({Date::parse("2023-06-30"), {}});
    CHECK_THROWS_AS(store.append_release({Date::parse("2023-06-30"), {}}), DataError);
    CHECK_THROWS_AS(store.append_release({Date::parse("2023-05-31"), {}}), DataError);
}

TEST_CASE("store round-trips through disk") {
    fs::path dir = fresh_dir("delaylens_store_test");
    std::string rel1 = kHeader;
    rel1 += row("A", "2023-05-01", "Kenya", "1.0", "36.0", "Riots", "0", "2023-05-06");
    std::string rel2 = kHeader;
    rel2 += row("A", "2023-05-01", "Kenya", "1.0", "36.0", "Riots", "0", "2023-05-02");
    rel2 += row("B", "2023-06-20", "Kenya", "1.1", "36.1", "Battles", "2", "2023-06-21");

    auto rejects1 = store_ingest(dir, rel1, Date::parse("2023-06-30"));
    auto rejects2 = store_ingest(dir, rel2, Date::parse("2023-07-31"));
    CHECK(rejects1.empty());
    CHECK(rejects2.empty());

    // Raw bytes preserved verbatim.
    std::ifstream raw(dir / "releases" / "2023-06-30.csv", std::ios::binary);
    std::string raw_text((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
    CHECK(raw_text == rel1);

    SnapshotStore store = store_load(dir);
    REQUIRE(store.releases().size() == 2);
    CHECK(store.index().at("A").timestamp.to_string() == "2023-05-02");
    CHECK(store.index().at("B").first_release.to_string() == "2023-07-31");

    // The persisted index agrees with the one rebuilt from raw releases.
    FirstSeenIndex from_disk = store_read_index(dir);
    REQUIRE(from_disk.size() == store.index().size());
    for (const auto& [id, seen] : store.index()) {
        CHECK(from_disk.at(id).first_release == seen.first_release);
        CHECK(from_disk.at(id).timestamp == seen.timestamp);
    }

    // Ordering enforced across process restarts too.
    CHECK_THROWS_AS(store_ingest(dir, rel1, Date::parse("2023-07-31")), DataError);
    fs::remove_all(dir);
}

TEST_CASE("strict ingest escalates rejects") {
    fs::path dir = fresh_dir("delaylens_store_strict");
    std::string text = kHeader;
    text += row("A", "2023-05-01", "Kenya", "95.0", "36.0", "Riots", "0", "2023-05-02");
    CHECK_THROWS_AS(store_ingest(dir, text, Date::parse("2023-06-30"), true), DataError);
    // Nothing persisted on failure.
    CHECK(!fs::exists(dir / "index.json"));
    fs::remove_all(dir);
}

TEST_CASE("event type names round-trip") {
    for (EventType t : all_event_types()) {
        auto back = event_type_from_string(to_string(t));
        REQUIRE(back.has_value());
        CHECK(*back == t);
    }
    CHECK(!event_type_from_string("battles").has_value());
}
