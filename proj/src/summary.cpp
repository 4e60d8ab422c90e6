#include <algorithm>
#include <numeric>
#include <sstream>

#include "delaylens/cli.hpp"
#include "delaylens/csv.hpp"
#include "delaylens/delay_pipeline.hpp"
#include "delaylens/errors.hpp"

namespace delaylens {

SummaryRow summarize_variable(const SummaryVariable& variable) {
    if (variable.values.empty()) {
        throw DataError("variable '" + variable.name + "' has no observations");
    }
    SummaryRow row;
    row.name = variable.name;
    row.n = variable.values.size();
    const auto [lo, hi] = std::minmax_element(variable.values.begin(), variable.values.end());
    row.min = *lo;
    row.max = *hi;
    row.mean = std::accumulate(variable.values.begin(), variable.values.end(), 0.0) /
               static_cast<double>(row.n);
    if (row.n == 1) {
        row.q1 = row.median = row.q3 = variable.values.front();
    } else {
        row.q1 = percentile_interpolated(variable.values, 25.0);
        row.median = percentile_interpolated(variable.values, 50.0);
        row.q3 = percentile_interpolated(variable.values, 75.0);
    }
    return row;
}

std::string summary_markdown(const std::vector<SummaryVariable>& variables) {
    if (variables.empty()) throw DataError("nothing to summarize");
    std::ostringstream out;
    out << "# Summary statistics\n\n";
    out << "| Variable | N | Min | Q1 | Median | Mean | Q3 | Max |\n";
    out << "| --- | ---: | ---: | ---: | ---: | ---: | ---: | ---: |\n";
    for (const SummaryVariable& v : variables) {
        const SummaryRow r = summarize_variable(v);
        out << "| " << r.name << " | " << r.n << " | " << format_double(r.min) << " | "
            << format_double(r.q1) << " | " << format_double(r.median) << " | "
            << format_double(r.mean) << " | " << format_double(r.q3) << " | "
            << format_double(r.max) << " |\n";
    }
    return std::move(out).str();
}

}  // namespace delaylens
