#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "delaylens/covariates.hpp"
#include "delaylens/dates.hpp"
#include "delaylens/event_model.hpp"

namespace delaylens {

// Weekly baseline hazard shapes on the linear-predictor scale.
enum class HazardShape { Constant, Decreasing, UShaped, ReverseU };

std::string_view to_string(HazardShape s);
std::optional<HazardShape> hazard_shape_from_string(std::string_view s);

// Ground truth for the generator. Every field is honored deterministically:
// the same config always produces byte-identical releases.
struct SimConfig {
    std::uint64_t seed = 1;
    Date start = Date::parse("2024-01-01");  // a Monday; release cadence anchor
    int n_countries = 12;
    int occurrence_weeks = 16;       // events occur in weeks 0..occurrence_weeks-1
    int extra_report_weeks = 30;     // releases keep coming this long after the last
                                     // occurrence week
    double weekly_event_rate = 3.0;  // mean events per country and week
    int d_max = 20;

    // Linear predictor truth.
    double beta0 = -2.0;
    double shape_amplitude = 0.6;
    std::map<EventType, HazardShape> shapes;  // unlisted types fall back to Constant
    double beta_internet = 0.4;
    double beta_regime_electoral = 0.25;
    double beta_regime_democracy = 0.5;
    // Amplitudes of the fixed analytic covariate effects; see
    // true_smooth_effect for the functional forms.
    double amp_gdp = 0.35;
    double slope_pop = 0.25;
    double amp_fatality = 0.3;
    double slope_govcensor = 0.4;
    double slope_selfcensor = -0.3;

    // When set, every event uses this weekly reporting hazard directly and the
    // linear predictor truth is ignored.
    std::optional<double> hazard_override;

    // Reporting draws stop here; events still unreported never appear.
    int max_report_weeks = 120;

    // One bulk upload of very old events into a single mid-sequence release.
    bool inject_historical_batch = false;
    int historical_batch_size = 120;
};

// The documented truth components, exposed so tests can rebuild eta.
double shape_offset(HazardShape shape, int t, int d_max, double amplitude);
double true_smooth_effect(const SimConfig& config, std::string_view variable, double x);
double true_eta(const SimConfig& config, const CovariateVector& cv, EventType type, int t);

struct TruthEvent {
    std::string event_id;
    std::string country;
    EventType event_type = EventType::Battles;
    std::string sub_event_type;
    std::string source;
    Date occurrence;
    bool reported = false;    // within max_report_weeks
    Date report_date;         // valid when reported
    int true_delay_weeks = 0; // uncapped; valid when reported
    bool injected = false;    // part of the historical batch
    CovariateVector covariates;
};

struct SimResult {
    SimConfig config;
    std::vector<std::pair<Date, std::string>> releases;  // date, full-download CSV
    std::vector<TruthEvent> events;                      // sorted by event_id
    // Country-level covariates shared by all of a country's events.
    std::vector<std::pair<std::string, CovariateVector>> countries;
    Date last_occurrence_week_start;
};

SimResult simulate_releases(const SimConfig& config);

// Beta0 such that, averaged over the configured shapes with covariates at
// zero, the configured share of events reports within d_max weeks.
double calibrate_beta0(const SimConfig& config, double target_reported = 0.84);

// Preset used for recovery runs: mixed shapes, calibrated intercept, expected
// event count near n_events.
SimConfig calibrated_preset(std::uint64_t seed, int n_events);

// Serialized ground truth, deterministic key order.
std::string truth_to_json(const SimResult& result);

// Country-keyed covariate table consumed by the model-fitting command.
std::string format_country_covariates_csv(const SimResult& result);

// Writes <dir>/snapshots/<date>.csv, <dir>/truth.json, <dir>/covariates.csv.
void write_simulation(const SimResult& result, const std::filesystem::path& dir);

}  // namespace delaylens
