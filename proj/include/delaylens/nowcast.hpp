#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "delaylens/dates.hpp"
#include "delaylens/delay_pipeline.hpp"

namespace delaylens {

// Probability that an event is reported within d weeks of occurring,
// F(d) = 1 - prod_{t<=d}(1 - pi_t). Index 0 holds F(1).
struct ReportingCDF {
    std::vector<double> F;

    int d_max() const { return static_cast<int>(F.size()); }
    // F(d) for d >= 1; values past the horizon saturate at F(d_max).
    double at(int d) const;
};

// hazards[t-1] = pi_t for t = 1..d_max. Throws DataError when every hazard is
// zero (nothing is ever reported, so no correction exists) and UsageError for
// hazards outside [0, 1].
ReportingCDF reporting_cdf(const std::vector<double>& hazards);

// Per-week discrete hazards from the cleaned delay records; weeks nobody
// leaves the risk set keep hazard zero.
std::vector<double> empirical_cdf_hazards(const std::vector<DelayRecord>& records, int d_max);

struct WeeklyCount {
    Date week_start;
    std::int64_t observed = 0;
};

// Buckets records by the ISO week of the occurrence date, labeled by that
// week's Monday.
std::vector<WeeklyCount> weekly_occurrence_counts(const std::vector<DelayRecord>& records);

struct NowcastRow {
    Date week_start;
    std::int64_t observed = 0;
    int elapsed_weeks = 0;
    double F = 1.0;
    double multiplier = 1.0;
    double corrected = 0.0;
    bool refused = false;  // reporting probability below the floor
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct NowcastOptions {
    double f_floor = 0.05;
    bool with_ci = false;
    double z = 1.959963984540054;  // two-sided 95%
};

struct NowcastResult {
    std::vector<NowcastRow> rows;
    std::vector<std::string> warnings;
};

// Inverse-probability correction N_hat = N_obs / F(d). Weeks with d >= d_max
// stay unchanged with multiplier exactly 1. Weeks whose reporting probability
// sits below options.f_floor are flagged instead of corrected. Elapsed weeks
// are complete weeks between the occurrence week's start and as_of; every
// week must have at least one.
NowcastResult correct_counts(const std::vector<WeeklyCount>& observed, Date as_of,
                             const ReportingCDF& cdf, const NowcastOptions& options = {});

// occurrence_week,observed,elapsed_weeks,F,multiplier,corrected[,ci_low,ci_high]
// Refused weeks leave multiplier and corrected (and any interval) empty.
std::string format_nowcast_csv(const NowcastResult& result, bool with_ci);

}  // namespace delaylens
