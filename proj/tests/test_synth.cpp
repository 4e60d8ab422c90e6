#include <doctest.h>

#include <cmath>
#include <map>

#include "delaylens/delay_pipeline.hpp"
#include "delaylens/errors.hpp"
#include "delaylens/synth.hpp"

using namespace delaylens;

namespace {

SnapshotStore store_from(const SimResult& result) {
    SnapshotStore store;
    for (const auto& [date, csv] : result.releases) {
        ParseResult parsed = parse_snapshot(csv, date);
        REQUIRE(parsed.rejects.empty());
        store.append_release(std::move(parsed.release));
    }
    return store;
}

}  // namespace

TEST_CASE("certain first-week reporting puts every event in the next release") {
    SimConfig config;
    config.seed = 7;
    config.n_countries = 4;
    config.occurrence_weeks = 6;
    config.weekly_event_rate = 5.0;
    config.hazard_override = 1.0;
    const SimResult result = simulate_releases(config);
    REQUIRE(!result.events.empty());
    for (const TruthEvent& ev : result.events) {
        CHECK(ev.reported);
        CHECK(ev.true_delay_weeks == 1);
        CHECK(ev.report_date - ev.occurrence == 7);
    }
}

TEST_CASE("the same seed reproduces every release byte for byte") {
    SimConfig config;
    config.seed = 99;
    config.n_countries = 5;
    config.occurrence_weeks = 8;
    config.weekly_event_rate = 2.0;
    const SimResult a = simulate_releases(config);
    const SimResult b = simulate_releases(config);
    REQUIRE(a.releases.size() == b.releases.size());
    for (std::size_t i = 0; i < a.releases.size(); ++i) {
        CHECK(a.releases[i].first == b.releases[i].first);
        CHECK(a.releases[i].second == b.releases[i].second);
    }
    CHECK(truth_to_json(a) == truth_to_json(b));

    config.seed = 100;
    const SimResult c = simulate_releases(config);
    bool any_diff = c.releases.size() != a.releases.size();
    for (std::size_t i = 0; !any_diff && i < a.releases.size(); ++i) {
        any_diff = a.releases[i].second != c.releases[i].second;
    }
    CHECK(any_diff);
}

TEST_CASE("constant hazard delays follow the geometric distribution") {
    SimConfig config;
    config.seed = 2024;
    config.n_countries = 25;
    config.occurrence_weeks = 20;
    config.weekly_event_rate = 22.0;  // ~11000 events expected
    config.hazard_override = 0.5;
    const SimResult result = simulate_releases(config);
    REQUIRE(result.events.size() > 10000);

    std::map<int, std::int64_t> observed;
    std::int64_t n = 0;
    for (const TruthEvent& ev : result.events) {
        REQUIRE(ev.reported);  // P(unreported in 120 weeks) is 2^-120
        ++observed[ev.true_delay_weeks];
        ++n;
    }
    // Cells 1..10 plus a pooled tail; chi-square with 10 degrees of freedom.
    double chi2 = 0.0;
    double tail_expected = static_cast<double>(n);
    std::int64_t tail_observed = n;
    for (int d = 1; d <= 10; ++d) {
        const double expected = static_cast<double>(n) * std::pow(0.5, d);
        const auto it = observed.find(d);
        const double got = it == observed.end() ? 0.0 : static_cast<double>(it->second);
        chi2 += (got - expected) * (got - expected) / expected;
        tail_expected -= expected;
        tail_observed -= it == observed.end() ? 0 : it->second;
    }
    chi2 += (static_cast<double>(tail_observed) - tail_expected) *
            (static_cast<double>(tail_observed) - tail_expected) / tail_expected;
    // 0.99 quantile of chi-square(10)
    CHECK(chi2 < 23.209);
}

TEST_CASE("the delay pipeline recovers the ledger exactly up to the cap") {
    SimConfig config;
    config.seed = 5;
    config.n_countries = 8;
    config.occurrence_weeks = 10;
    config.weekly_event_rate = 6.0;
    config.beta0 = -2.3;
    config.shapes = {{EventType::Protests, HazardShape::UShaped},
                     {EventType::Battles, HazardShape::Decreasing}};
    const SimResult result = simulate_releases(config);
    const SnapshotStore store = store_from(result);

    CleaningConfig cleaning;
    cleaning.country_min_events = 0;  // keep every country in this check
    const Date window_end = result.releases.back().first;
    const DelayDataset dataset =
        build_delay_dataset(store, config.start, window_end, cleaning);
    CHECK(dataset.rejects.empty());

    std::map<std::string, const TruthEvent*> ledger;
    for (const TruthEvent& ev : result.events) ledger[ev.event_id] = &ev;

    std::size_t reported_by_end = 0;
    for (const TruthEvent& ev : result.events) {
        if (ev.reported && ev.report_date <= window_end) ++reported_by_end;
    }
    CHECK(dataset.records.size() == reported_by_end);

    for (const DelayRecord& rec : dataset.records) {
        const TruthEvent* truth = ledger.at(rec.event_id);
        CHECK(rec.occurrence_date == truth->occurrence);
        CHECK(rec.uncapped_weeks == truth->true_delay_weeks);
        if (truth->true_delay_weeks <= cleaning.d_max) {
            CHECK(rec.delay_weeks == truth->true_delay_weeks);
            CHECK_FALSE(rec.censored);
        } else {
            CHECK(rec.delay_weeks == cleaning.d_max);
            CHECK(rec.censored);
        }
    }
}

TEST_CASE("the historical filter removes exactly the injected batch") {
    SimConfig config;
    config.seed = 11;
    config.n_countries = 6;
    config.occurrence_weeks = 8;
    config.weekly_event_rate = 4.0;
    config.inject_historical_batch = true;
    config.historical_batch_size = 130;
    const SimResult result = simulate_releases(config);
    const SnapshotStore store = store_from(result);

    CleaningConfig cleaning;
    cleaning.country_min_events = 0;
    const Date window_end = result.releases.back().first;
    const DelayDataset dataset =
        build_delay_dataset(store, config.start, window_end, cleaning);

    const HistoricalFilterResult filtered =
        filter_historical_batches(dataset.records, cleaning);
    REQUIRE(filtered.removed.size() == 1);
    CHECK(filtered.removed[0].source == "ArchiveDump");
    CHECK(filtered.removed[0].size == 130);
    CHECK(filtered.removed[0].long_delay_count == 130);

    std::size_t injected_in_dataset = 0;
    for (const DelayRecord& rec : dataset.records) {
        if (rec.source == "ArchiveDump") ++injected_in_dataset;
    }
    CHECK(injected_in_dataset == 130);
    for (const DelayRecord& rec : filtered.kept) {
        CHECK(rec.source != "ArchiveDump");
    }
    CHECK(filtered.kept.size() + 130 == dataset.records.size());
}

TEST_CASE("the calibrated preset reports close to the target share by the horizon") {
    SimConfig config = calibrated_preset(31, 12000);
    const double share_by_formula = [&] {
        double total = 0.0;
        for (EventType type : all_event_types()) {
            double log_surv = 0.0;
            for (int t = 1; t <= config.d_max; ++t) {
                CovariateVector zero;
                zero.logGDP = 9.0;
                zero.logPOP = 15.0;
                zero.logFATALITY_cum = 1.5;  // cos zero point
                zero.govcensor = 0.5;
                zero.selfcensor = 0.5;
                log_surv -= std::exp(true_eta(config, zero, type, t));
            }
            total += 1.0 - std::exp(log_surv);
        }
        return total / kNumEventTypes;
    }();
    CHECK(share_by_formula == doctest::Approx(0.84).epsilon(0.01));

    const SimResult result = simulate_releases(config);
    CHECK(static_cast<double>(result.events.size()) ==
          doctest::Approx(12000.0).epsilon(0.05));
    std::size_t within = 0;
    for (const TruthEvent& ev : result.events) {
        if (ev.reported && ev.true_delay_weeks <= config.d_max) ++within;
    }
    const double share =
        static_cast<double>(within) / static_cast<double>(result.events.size());
    // Covariate effects spread individual hazards, so the realized share sits
    // near, not exactly at, the covariate-neutral target.
    CHECK(share == doctest::Approx(0.84).epsilon(0.06));
}

TEST_CASE("simulated hazards always lie inside the unit interval") {
    const SimConfig config = calibrated_preset(1, 3000);
    for (EventType type : all_event_types()) {
        for (int t = 1; t <= config.d_max; ++t) {
            CovariateVector cv;
            cv.logGDP = 11.0;
            cv.logPOP = 17.0;
            cv.logFATALITY_cum = 0.0;
            cv.govcensor = 1.0;
            cv.selfcensor = 0.0;
            cv.internet = 1;
            cv.regime = Regime::Democracy;
            const double pi = 1.0 - std::exp(-std::exp(true_eta(config, cv, type, t)));
            CHECK(pi > 0.0);
            CHECK(pi < 1.0);
        }
    }
}

TEST_CASE("truth effects are exposed for every modeled covariate") {
    SimConfig config;
    CHECK(true_smooth_effect(config, "logGDP", 9.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(true_smooth_effect(config, "logPOP", 16.0) ==
          doctest::Approx(config.slope_pop).epsilon(1e-12));
    CHECK(true_smooth_effect(config, "govcensor", 0.5) == 0.0);
    CHECK_THROWS_AS(true_smooth_effect(config, "logBORDER", 1.0), UsageError);
    CHECK(hazard_shape_from_string("u") == HazardShape::UShaped);
    CHECK(hazard_shape_from_string("nope") == std::nullopt);
    CHECK(to_string(HazardShape::ReverseU) == "reverse-u");
}

TEST_CASE("written simulations land on disk with stable names") {
    SimConfig config;
    config.seed = 3;
    config.n_countries = 2;
    config.occurrence_weeks = 2;
    config.weekly_event_rate = 1.0;
    config.extra_report_weeks = 4;
    const SimResult result = simulate_releases(config);
    const auto dir = std::filesystem::temp_directory_path() / "delaylens-synth-test";
    std::filesystem::remove_all(dir);
    write_simulation(result, dir);
    CHECK(std::filesystem::exists(dir / "truth.json"));
    CHECK(std::filesystem::exists(dir / "covariates.csv"));
    std::size_t snapshots = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir / "snapshots")) {
        (void)entry;
        ++snapshots;
    }
    CHECK(snapshots == result.releases.size());
    std::filesystem::remove_all(dir);
}
