#include "delaylens/survival.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "delaylens/csv.hpp"
#include "delaylens/errors.hpp"

namespace delaylens {

namespace {

constexpr std::string_view kRegimeNames[3] = {"Closed Autocracy", "Electoral Autocracy",
                                              "Democracy"};

}  // namespace

std::string_view to_string(Regime r) { return kRegimeNames[static_cast<int>(r)]; }

std::optional<Regime> regime_from_code(int code) {
    if (code < 0 || code > 2) return std::nullopt;
    return static_cast<Regime>(code);
}

KMCurve kaplan_meier(const std::vector<std::pair<int, bool>>& delays, int horizon) {
    if (delays.empty()) throw UsageError("Kaplan-Meier of an empty dataset");
    if (horizon < 1) throw UsageError("Kaplan-Meier horizon must be at least one week");
    for (const auto& [w, c] : delays) {
        if (w < 1) throw UsageError("delay weeks must be >= 1");
    }

    // counts[t] = (events at t, total leaving at t); risk set at t is everyone
    // whose recorded week is >= t.
    std::vector<std::int64_t> events(static_cast<std::size_t>(horizon) + 1, 0);
    std::vector<std::int64_t> leaving(static_cast<std::size_t>(horizon) + 1, 0);
    std::int64_t beyond = 0;  // recorded week past the horizon: at risk throughout
    for (const auto& [w, censored] : delays) {
        if (w > horizon) {
            ++beyond;
            continue;
        }
        ++leaving[static_cast<std::size_t>(w)];
        if (!censored) ++events[static_cast<std::size_t>(w)];
    }

    std::int64_t at_risk = beyond;
    for (int t = 1; t <= horizon; ++t) at_risk += leaving[static_cast<std::size_t>(t)];

    KMCurve curve;
    curve.reserve(static_cast<std::size_t>(horizon));
    double survival = 1.0;
    double greenwood = 0.0;
    for (int t = 1; t <= horizon; ++t) {
        KMRow row;
        row.t = t;
        row.n_risk = at_risk;
        row.events = events[static_cast<std::size_t>(t)];
        row.hazard = at_risk > 0
                         ? static_cast<double>(row.events) / static_cast<double>(row.n_risk)
                         : 0.0;
        survival *= 1.0 - row.hazard;
        row.survival = survival;
        if (row.n_risk > row.events) {
            greenwood += static_cast<double>(row.events) /
                         (static_cast<double>(row.n_risk) *
                          static_cast<double>(row.n_risk - row.events));
        } else if (row.events > 0) {
            greenwood = std::numeric_limits<double>::quiet_NaN();
        }
        row.se = survival * std::sqrt(greenwood);
        curve.push_back(row);
        at_risk -= leaving[static_cast<std::size_t>(t)];
    }
    return curve;
}

KMCurve kaplan_meier(const std::vector<DelayRecord>& records, int horizon, bool use_uncapped) {
    std::vector<std::pair<int, bool>> delays;
    delays.reserve(records.size());
    for (const auto& r : records) {
        if (use_uncapped) {
            delays.emplace_back(r.uncapped_weeks, false);
        } else {
            delays.emplace_back(r.delay_weeks, r.censored);
        }
    }
    return kaplan_meier(delays, horizon);
}

std::vector<PersonPeriodRow> expand_person_period(const DelayRecord& record, int d_max,
                                                  const CovariateVector& covariates) {
    if (d_max < 1) throw UsageError("person-period horizon must be at least one week");
    const bool censored = record.uncapped_weeks > d_max;
    const int weeks = censored ? d_max : record.uncapped_weeks;
    std::vector<PersonPeriodRow> rows;
    rows.reserve(static_cast<std::size_t>(weeks));
    for (int t = 1; t <= weeks; ++t) {
        PersonPeriodRow row;
        row.event_id = record.event_id;
        row.t = t;
        row.y = (!censored && t == weeks) ? 1 : 0;
        row.event_type = record.event_type;
        row.covariates = covariates;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PersonPeriodRow> expand_dataset(const std::vector<DelayRecord>& records, int d_max,
                                            const std::vector<CovariateVector>& covariates) {
    if (!covariates.empty() && covariates.size() != records.size()) {
        throw UsageError("covariate list does not align with the records");
    }
    std::vector<PersonPeriodRow> rows;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto expanded = expand_person_period(records[i], d_max,
                                             covariates.empty() ? CovariateVector{}
                                                                : covariates[i]);
        rows.insert(rows.end(), std::make_move_iterator(expanded.begin()),
                    std::make_move_iterator(expanded.end()));
    }
    return rows;
}

std::map<int, double> empirical_hazard(const std::vector<PersonPeriodRow>& rows) {
    std::map<int, std::pair<std::int64_t, std::int64_t>> counts;  // events, total
    for (const auto& row : rows) {
        auto& c = counts[row.t];
        if (row.y == 1) ++c.first;
        ++c.second;
    }
    std::map<int, double> hazard;
    for (const auto& [t, c] : counts) {
        hazard[t] = static_cast<double>(c.first) / static_cast<double>(c.second);
    }
    return hazard;
}

std::vector<double> survival_from_hazard(const std::vector<double>& hazards) {
    std::vector<double> survival;
    survival.reserve(hazards.size());
    double s = 1.0;
    for (double h : hazards) {
        s *= 1.0 - h;
        survival.push_back(s);
    }
    return survival;
}

std::string format_km_csv(const KMCurve& curve, bool with_se) {
    std::ostringstream out;
    out << (with_se ? "t,n_risk,events,hazard,survival,se\n" : "t,n_risk,events,hazard,survival\n");
    for (const KMRow& row : curve) {
        std::vector<std::string> fields{std::to_string(row.t), std::to_string(row.n_risk),
                                        std::to_string(row.events), format_double(row.hazard),
                                        format_double(row.survival)};
        if (with_se) fields.push_back(std::isfinite(row.se) ? format_double(row.se) : "");
        write_csv_row(out, fields, ',');
    }
    return std::move(out).str();
}

}  // namespace delaylens
