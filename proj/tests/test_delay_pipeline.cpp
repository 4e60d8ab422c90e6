#include <doctest.h>

#include <algorithm>
#include <random>

#include "delaylens/delay_pipeline.hpp"
#include "delaylens/errors.hpp"

using namespace delaylens;

namespace {

EventRecord make_event(const std::string& id, const std::string& event_date,
                       const std::string& timestamp, const std::string& country = "Kenya",
                       const std::string& source = "SrcA") {
    EventRecord r;
    r.event_id = id;
    r.event_date = Date::parse(event_date);
    r.timestamp_date = Date::parse(timestamp);
    r.country = country;
    r.source = source;
    r.event_type = EventType::Protests;
    r.sub_event_type = "Peaceful protest";
    r.latitude = 1.0;
    r.longitude = 36.0;
    return r;
}

DelayRecord make_delay(const std::string& id, const std::string& first_seen, int uncapped,
                       const std::string& country = "Kenya", const std::string& source = "SrcA") {
    DelayRecord r;
    r.event_id = id;
    r.first_seen_date = Date::parse(first_seen);
    r.occurrence_date = r.first_seen_date - 7 * uncapped;
    r.uncapped_weeks = uncapped;
    r.delay_weeks = std::min(uncapped, 20);
    r.censored = uncapped > 20;
    r.country = country;
    r.source = source;
    return r;
}

}  // namespace

TEST_CASE("compute_delay follows the ceiling convention with a one-week floor") {
    auto d = [](const char* t, const char* r) {
        return compute_delay(Date::parse(t), Date::parse(r), 20);
    };
    CHECK(d("2024-06-17", "2024-06-18") == std::pair{1, false});
    CHECK(d("2024-06-17", "2024-06-22") == std::pair{1, false});  // 5 days
    CHECK(d("2024-06-17", "2024-06-24") == std::pair{1, false});  // exactly 7 days
    CHECK(d("2024-06-17", "2024-06-25") == std::pair{2, false});  // 8 days
    CHECK(d("2024-06-17", "2024-06-28") == std::pair{2, false});  // 11 days
    // 140 days = exactly 20 weeks: at the cap but not beyond it.
    CHECK(d("2024-01-01", "2024-05-20") == std::pair{20, false});
    CHECK(d("2024-01-01", "2024-05-21") == std::pair{20, true});  // 141 days
    // 200-day gap censors at the cap.
    CHECK(compute_delay(Date::parse("2024-01-01"), Date::parse("2024-01-01") + 200, 20) ==
          std::pair{20, true});
    CHECK_THROWS_AS(d("2024-06-17", "2024-06-17"), DataError);
    CHECK_THROWS_AS(d("2024-06-17", "2024-06-10"), DataError);
}

TEST_CASE("diff_releases finds ids absent from all earlier releases") {
    SnapshotStore store;
    store.append_release({Date::parse("2024-06-30"), {make_event("A", "2024-06-01", "2024-06-03")}});
    store.append_release({Date::parse("2024-07-31"),
                          {make_event("A", "2024-06-01", "2024-07-02"),  // update, not new
                           make_event("B", "2024-07-10", "2024-07-12")}});
    store.append_release({Date::parse("2024-08-31"),
                          {make_event("B", "2024-07-10", "2024-07-12"),
                           make_event("C", "2024-08-01", "2024-08-02")}});

    CHECK(diff_releases(store, Date::parse("2024-07-31")) == std::vector<std::string>{"B"});
    CHECK(diff_releases(store, Date::parse("2024-08-31")) == std::vector<std::string>{"C"});
    // Release identical to its predecessor yields nothing new.
    SnapshotStore twins;
    twins.append_release({Date::parse("2024-06-30"), {make_event("A", "2024-06-01", "2024-06-03")}});
    twins.append_release({Date::parse("2024-07-31"), {make_event("A", "2024-06-01", "2024-06-03")}});
    CHECK(diff_releases(twins, Date::parse("2024-07-31")).empty());
    CHECK_THROWS_AS(diff_releases(store, Date::parse("2024-09-30")), UsageError);
}

TEST_CASE("build_delay_dataset enumerates newly seen events with hand-checked delays") {
    SnapshotStore store;
    // Baseline holds two pre-existing events.
    store.append_release({Date::parse("2024-06-30"),
                          {make_event("P1", "2024-05-01", "2024-05-03"),
                           make_event("P2", "2024-06-10", "2024-06-12")}});
    // Week 1 release: two fresh events.
    store.append_release({Date::parse("2024-07-07"),
                          {make_event("P1", "2024-05-01", "2024-05-03"),
                           make_event("N1", "2024-07-01", "2024-07-03"),   // 2 days → week 1
                           make_event("N2", "2024-06-20", "2024-07-02")}});  // 12 days → week 2
    // Week 2 release: one fresh event plus N1 republished with an EARLIER timestamp.
    store.append_release({Date::parse("2024-07-14"),
                          {make_event("N1", "2024-07-01", "2024-07-02"),
                           make_event("N3", "2024-01-05", "2024-07-09")}});  // 186 days → censored

    CleaningConfig cfg;
    DelayDataset ds = build_delay_dataset(store, Date::parse("2024-06-30"),
                                          Date::parse("2024-07-14"), cfg);
    REQUIRE(ds.records.size() == 3);
    REQUIRE(ds.rejects.empty());
    // Sorted by (event_date, id): N3 (Jan), N2 (Jun 20), N1 (Jul 1).
    CHECK(ds.records[0].event_id == "N3");
    CHECK(ds.records[1].event_id == "N2");
    CHECK(ds.records[2].event_id == "N1");
    CHECK(ds.records[2].first_seen_date.to_string() == "2024-07-02");  // earlier timestamp won
    CHECK(ds.records[2].delay_weeks == 1);
    CHECK(ds.records[1].delay_weeks == 2);
    CHECK(ds.records[0].censored);
    CHECK(ds.records[0].delay_weeks == 20);
    CHECK(ds.records[0].uncapped_weeks == 27);  // ceil(186/7)

    // Baseline-only window yields an empty dataset.
    DelayDataset empty = build_delay_dataset(store, Date::parse("2024-07-14"),
                                             Date::parse("2024-08-14"), cfg);
    CHECK(empty.records.empty());

    // Pre-window occurrences excluded on request: N2 and N3 predate the baseline.
    cfg.include_pre_window_occurrences = false;
    DelayDataset inwin = build_delay_dataset(store, Date::parse("2024-06-30"),
                                             Date::parse("2024-07-14"), cfg);
    REQUIRE(inwin.records.size() == 1);
    CHECK(inwin.records[0].event_id == "N1");
}

TEST_CASE("build_delay_dataset requires a baseline and a real window") {
    SnapshotStore store;
    CleaningConfig cfg;
    CHECK_THROWS_AS(
        build_delay_dataset(store, Date::parse("2024-06-30"), Date::parse("2024-07-31"), cfg),
        UsageError);
    store.append_release({Date::parse("2024-06-30"), {}});
    CHECK_THROWS_AS(
        build_delay_dataset(store, Date::parse("2024-06-29"), Date::parse("2024-07-31"), cfg),
        UsageError);
    CHECK_THROWS_AS(
        build_delay_dataset(store, Date::parse("2024-06-30"), Date::parse("2024-06-30"), cfg),
        UsageError);
}

TEST_CASE("build_delay_dataset reports chronology violations instead of aborting") {
    SnapshotStore store;
    store.append_release({Date::parse("2024-06-30"), {}});
    store.append_release({Date::parse("2024-07-07"),
                          {make_event("OK", "2024-07-01", "2024-07-02"),
                           make_event("BAD", "2024-07-05", "2024-07-01")}});
    DelayDataset ds = build_delay_dataset(store, Date::parse("2024-06-30"),
                                          Date::parse("2024-07-07"), CleaningConfig{});
    REQUIRE(ds.records.size() == 1);
    CHECK(ds.records[0].event_id == "OK");
    REQUIRE(ds.rejects.size() == 1);
    CHECK(ds.rejects[0].event_id == "BAD");
}

TEST_CASE("build_delay_dataset is order-independent within releases") {
    auto build = [](bool shuffled) {
        std::vector<EventRecord> recs;
        for (int i = 0; i < 25; ++i) {
            recs.push_back(make_event("E" + std::to_string(i), "2024-07-0" + std::to_string(1 + i % 5),
                                      "2024-07-1" + std::to_string(i % 5)));
        }
        if (shuffled) {
            std::mt19937 rng(17);
            std::shuffle(recs.begin(), recs.end(), rng);
        }
        SnapshotStore store;
        store.append_release({Date::parse("2024-06-30"), {}});
        store.append_release({Date::parse("2024-07-31"), std::move(recs)});
        return build_delay_dataset(store, Date::parse("2024-06-30"), Date::parse("2024-07-31"),
                                   CleaningConfig{});
    };
    DelayDataset a = build(false);
    DelayDataset b = build(true);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].event_id == b.records[i].event_id);
        CHECK(a.records[i].delay_weeks == b.records[i].delay_weeks);
    }
}

TEST_CASE("historical batch filter removes whole groups over the threshold") {
    std::vector<DelayRecord> records;
    // A 120-strong same-day batch, 110 of them long-delay: the whole group goes.
    for (int i = 0; i < 110; ++i)
        records.push_back(make_delay("L" + std::to_string(i), "2024-08-05", 45, "Aland", "Hist"));
    for (int i = 0; i < 10; ++i)
        records.push_back(make_delay("S" + std::to_string(i), "2024-08-05", 3, "Aland", "Hist"));
    // A small long-delay group stays (below the batch minimum).
    for (int i = 0; i < 5; ++i)
        records.push_back(make_delay("K" + std::to_string(i), "2024-08-05", 50, "Borland", "Hist"));
    // Ordinary records untouched.
    records.push_back(make_delay("N0", "2024-08-06", 2, "Aland", "Hist"));

    CleaningConfig cfg;
    HistoricalFilterResult res = filter_historical_batches(records, cfg);
    CHECK(res.kept.size() + 120 == records.size());
    REQUIRE(res.removed.size() == 1);
    CHECK(res.removed[0].country == "Aland");
    CHECK(res.removed[0].size == 120);
    CHECK(res.removed[0].long_delay_count == 110);
    // Nothing from the small group or other days was removed.
    for (const auto& r : res.kept) {
        CHECK((r.country != "Aland" || r.first_seen_date != Date::parse("2024-08-05")));
    }

    // Composition: kept + removed sizes account for every input record.
    std::size_t removed_total = 0;
    for (const auto& b : res.removed) removed_total += b.size;
    CHECK(res.kept.size() + removed_total == records.size());

    // A dataset with no long delays passes through unchanged.
    std::vector<DelayRecord> clean;
    for (int i = 0; i < 200; ++i)
        clean.push_back(make_delay("C" + std::to_string(i), "2024-08-05", 2));
    HistoricalFilterResult res2 = filter_historical_batches(clean, cfg);
    CHECK(res2.kept.size() == clean.size());
    CHECK(res2.removed.empty());
}

TEST_CASE("exactly-threshold delays do not count as historical") {
    std::vector<DelayRecord> records;
    for (int i = 0; i < 150; ++i)
        records.push_back(make_delay("E" + std::to_string(i), "2024-08-05", 40));  // not > 40
    HistoricalFilterResult res = filter_historical_batches(records, CleaningConfig{});
    CHECK(res.kept.size() == 150);
    CHECK(res.removed.empty());
}

TEST_CASE("country filter applies the reference threshold and the exclusion list") {
    std::vector<DelayRecord> records;
    records.push_back(make_delay("A1", "2024-08-05", 2, "Bigland"));
    records.push_back(make_delay("A2", "2024-08-05", 2, "Smallland"));
    records.push_back(make_delay("A3", "2024-08-05", 2, "Edgeland"));
    records.push_back(make_delay("A4", "2024-08-05", 2, "Mystery"));
    records.push_back(make_delay("A5", "2024-08-05", 2, "Outpost"));

    std::map<std::string, std::size_t> counts{
        {"Bigland", 500}, {"Smallland", 9}, {"Edgeland", 10}, {"Outpost", 50}};
    CleaningConfig cfg;
    cfg.country_exclusions = {"Outpost"};
    CountryFilterResult res = filter_countries(records, counts, cfg);
    REQUIRE(res.kept.size() == 2);
    CHECK(res.kept[0].country == "Bigland");
    CHECK(res.kept[1].country == "Edgeland");  // count 10 kept: threshold is "fewer than 10"
    CHECK(res.dropped_by_country.at("Smallland") == 1);
    CHECK(res.dropped_by_country.at("Outpost") == 1);
    CHECK(res.missing_reference == std::vector<std::string>{"Mystery"});

    std::size_t dropped_total = 0;
    for (const auto& [_, n] : res.dropped_by_country) dropped_total += n;
    CHECK(res.kept.size() + dropped_total == records.size());

    cfg.drop_missing_reference = false;
    CountryFilterResult res2 = filter_countries(records, counts, cfg);
    CHECK(res2.kept.size() == 3);
}

TEST_CASE("interpolated percentile matches hand values") {
    std::vector<double> seq;
    for (int i = 1; i <= 100; ++i) seq.push_back(i);
    CHECK(percentile_interpolated(seq, 99.0) == doctest::Approx(99.01).epsilon(1e-12));
    CHECK(percentile_interpolated(seq, 1.0) == doctest::Approx(1.99).epsilon(1e-12));
    CHECK(percentile_interpolated(seq, 50.0) == doctest::Approx(50.5).epsilon(1e-12));
    CHECK(percentile_interpolated({42.0}, 50.0) == 42.0);
    CHECK(percentile_interpolated({1.0, 2.0}, 75.0) == doctest::Approx(1.75));
    CHECK_THROWS_AS(percentile_interpolated({}, 50.0), UsageError);
    CHECK_THROWS_AS(percentile_interpolated({1.0}, 0.0), UsageError);
    CHECK_THROWS_AS(percentile_interpolated({1.0}, 100.0), UsageError);
}

TEST_CASE("winsorize clamps one side and is idempotent") {
    std::vector<double> seq;
    for (int i = 1; i <= 100; ++i) seq.push_back(i);

    std::vector<double> upper = winsorize(seq, WinsorSide::Upper, 99.0);
    CHECK(upper[99] == doctest::Approx(99.01).epsilon(1e-12));
    CHECK(upper[98] == 99.0);
    CHECK(upper[0] == 1.0);

    std::vector<double> lower = winsorize(seq, WinsorSide::Lower, 1.0);
    CHECK(lower[0] == doctest::Approx(1.99).epsilon(1e-12));
    CHECK(lower[1] == 2.0);

    // Constant vectors are untouched; reapplying a rule changes nothing.
    std::vector<double> flat(10, 3.5);
    CHECK(winsorize(flat, WinsorSide::Upper, 99.0) == flat);
    double q = percentile_interpolated(seq, 99.0);
    CHECK(winsorize_at(upper, WinsorSide::Upper, q) == upper);

    // Order is preserved; the median of {1,3,5,100} interpolates to 4.
    std::vector<double> jumbled{5.0, 1.0, 100.0, 3.0};
    std::vector<double> w = winsorize(jumbled, WinsorSide::Upper, 50.0);
    CHECK(w == std::vector<double>{4.0, 1.0, 4.0, 3.0});
}

TEST_CASE("delays csv round-trips") {
    std::vector<DelayRecord> records;
    DelayRecord r = make_delay("E,1", "2024-08-05", 25, "Côte d'Ivoire", "Src \"B\"");
    r.event_type = EventType::ViolenceAgainstCivilians;
    r.sub_event_type = "Attack";
    r.fatalities = 3;
    r.latitude = 7.54;
    r.longitude = -5.55;
    records.push_back(r);
    records.push_back(make_delay("E2", "2024-08-12", 1));

    std::string csv = format_delays_csv(records);
    std::vector<DelayRecord> back = parse_delays_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[0].event_id == "E,1");
    CHECK(back[0].country == "Côte d'Ivoire");
    CHECK(back[0].source == "Src \"B\"");
    CHECK(back[0].delay_weeks == 20);
    CHECK(back[0].censored);
    CHECK(back[0].uncapped_weeks == 25);  // recomputed from the dates
    CHECK(back[0].event_type == EventType::ViolenceAgainstCivilians);
    CHECK(back[0].latitude == 7.54);
    CHECK(back[1].delay_weeks == 1);
    CHECK(!back[1].censored);
    // Round-trip is byte-stable.
    CHECK(format_delays_csv(back) == csv);
}
