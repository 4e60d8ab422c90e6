#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "delaylens/covariates.hpp"
#include "delaylens/delay_pipeline.hpp"

namespace delaylens {

struct KMRow {
    int t = 0;
    std::int64_t n_risk = 0;
    std::int64_t events = 0;
    double hazard = 0.0;
    double survival = 1.0;
    double se = 0.0;  // Greenwood; NaN once the risk set is exhausted
};

using KMCurve = std::vector<KMRow>;

// Discrete product-limit estimate over weeks 1..horizon. Censored observations
// stay at risk through their recorded week and contribute no event. Throws
// UsageError on empty input.
KMCurve kaplan_meier(const std::vector<std::pair<int, bool>>& delays, int horizon);

// Convenience wrapper: (delay_weeks, censored) from records, or the uncapped
// week count (never censored) for long-horizon views.
KMCurve kaplan_meier(const std::vector<DelayRecord>& records, int horizon,
                     bool use_uncapped = false);

// One Bernoulli observation of the discrete-time hazard.
struct PersonPeriodRow {
    std::string event_id;
    int t = 1;       // week index, 1-based
    int y = 0;       // 1 only on the reporting week of an uncensored event
    EventType event_type = EventType::Battles;
    CovariateVector covariates;  // time-invariant, copied onto every row
};

// Uncensored delay d: rows t=1..d with y=(0,...,0,1). Censored: d_max rows,
// all zero. The record's uncapped week count is re-capped at d_max so the
// expansion stays consistent under a different horizon.
std::vector<PersonPeriodRow> expand_person_period(const DelayRecord& record, int d_max,
                                                  const CovariateVector& covariates = {});

std::vector<PersonPeriodRow> expand_dataset(const std::vector<DelayRecord>& records, int d_max,
                                            const std::vector<CovariateVector>& covariates = {});

// h_t = (# rows at week t with y=1) / (# rows at week t); weeks with no rows
// are absent from the map.
std::map<int, double> empirical_hazard(const std::vector<PersonPeriodRow>& rows);

// S_t = prod_{u<=t} (1 - h_u), same arithmetic as the product-limit estimate.
std::vector<double> survival_from_hazard(const std::vector<double>& hazards);

// km.csv: t,n_risk,events,hazard,survival[,se].
std::string format_km_csv(const KMCurve& curve, bool with_se);

}  // namespace delaylens
