#include <algorithm>
#include <cmath>

#include "delaylens/csv.hpp"
#include "delaylens/errors.hpp"
#include "delaylens/nowcast.hpp"
#include "delaylens/survival.hpp"

namespace delaylens {

double ReportingCDF::at(int d) const {
    if (d < 1) throw UsageError("reporting probability is defined for d >= 1");
    if (F.empty()) throw UsageError("empty reporting distribution");
    const int idx = std::min(d, d_max());
    return F[static_cast<std::size_t>(idx - 1)];
}

ReportingCDF reporting_cdf(const std::vector<double>& hazards) {
    if (hazards.empty()) throw UsageError("need at least one weekly hazard");
    ReportingCDF cdf;
    cdf.F.reserve(hazards.size());
    double not_yet = 1.0;  // P(still unreported)
    bool any_positive = false;
    for (double pi : hazards) {
        if (!(pi >= 0.0 && pi <= 1.0)) {
            throw UsageError("weekly hazards must lie in [0, 1]");
        }
        if (pi > 0.0) any_positive = true;
        not_yet *= 1.0 - pi;
        cdf.F.push_back(1.0 - not_yet);
    }
    if (!any_positive) {
        throw DataError("all weekly reporting hazards are zero; no correction is possible");
    }
    return cdf;
}

std::vector<double> empirical_cdf_hazards(const std::vector<DelayRecord>& records, int d_max) {
    if (d_max < 1) throw UsageError("horizon must be at least one week");
    const std::map<int, double> hazard = empirical_hazard(expand_dataset(records, d_max));
    std::vector<double> out(static_cast<std::size_t>(d_max), 0.0);
    for (const auto& [t, pi] : hazard) {
        if (t >= 1 && t <= d_max) out[static_cast<std::size_t>(t - 1)] = pi;
    }
    return out;
}

std::vector<WeeklyCount> weekly_occurrence_counts(const std::vector<DelayRecord>& records) {
    std::map<Date, std::int64_t> buckets;
    for (const DelayRecord& r : records) {
        const Date monday = r.occurrence_date - (r.occurrence_date.weekday_iso() - 1);
        ++buckets[monday];
    }
    std::vector<WeeklyCount> out;
    out.reserve(buckets.size());
    for (const auto& [week, n] : buckets) out.push_back({week, n});
    return out;
}

NowcastResult correct_counts(const std::vector<WeeklyCount>& observed, Date as_of,
                             const ReportingCDF& cdf, const NowcastOptions& options) {
    if (cdf.F.empty()) throw UsageError("empty reporting distribution");
    NowcastResult result;
    result.rows.reserve(observed.size());
    for (const WeeklyCount& wk : observed) {
        if (wk.observed < 0) throw DataError("negative observed count");
        const int elapsed = (as_of - wk.week_start) / 7;
        if (elapsed < 1) {
            throw DataError("occurrence week starting " + wk.week_start.to_string() +
                            " has not completed a week by " + as_of.to_string());
        }
        NowcastRow row;
        row.week_start = wk.week_start;
        row.observed = wk.observed;
        row.elapsed_weeks = elapsed;
        row.F = cdf.at(elapsed);
        if (elapsed >= cdf.d_max()) {
            // Past the censoring horizon every event is treated as reported.
            row.multiplier = 1.0;
            row.corrected = static_cast<double>(wk.observed);
        } else if (row.F < options.f_floor) {
            row.refused = true;
            row.multiplier = 0.0;
            row.corrected = 0.0;
            result.warnings.push_back(
                "week " + wk.week_start.to_string() + ": reporting probability " +
                format_double(row.F) + " is below the floor " +
                format_double(options.f_floor) + "; point correction withheld");
        } else {
            row.multiplier = 1.0 / row.F;
            row.corrected = static_cast<double>(wk.observed) * row.multiplier;
        }
        if (options.with_ci && !row.refused) {
            // Delta method on N_obs ~ Binomial(N_true, F): the corrected count
            // carries variance about N_hat (1 - F) / F. The truth can never be
            // below what was already observed.
            const double var = row.corrected * (1.0 - row.F) / row.F;
            const double half = options.z * std::sqrt(std::max(0.0, var));
            row.ci_low = std::max(static_cast<double>(row.observed), row.corrected - half);
            row.ci_high = row.corrected + half;
        }
        result.rows.push_back(row);
    }
    return result;
}

std::string format_nowcast_csv(const NowcastResult& result, bool with_ci) {
    std::string out = "occurrence_week,observed,elapsed_weeks,F,multiplier,corrected";
    if (with_ci) out += ",ci_low,ci_high";
    out += '\n';
    for (const NowcastRow& row : result.rows) {
        out += row.week_start.to_string();
        out += ',';
        out += std::to_string(row.observed);
        out += ',';
        out += std::to_string(row.elapsed_weeks);
        out += ',';
        out += format_double(row.F);
        out += ',';
        if (!row.refused) {
            out += format_double(row.multiplier);
            out += ',';
            out += format_double(row.corrected);
        } else {
            out += ',';
        }
        if (with_ci) {
            out += ',';
            if (!row.refused) {
                out += format_double(row.ci_low);
                out += ',';
                out += format_double(row.ci_high);
            } else {
                out += ',';
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace delaylens
