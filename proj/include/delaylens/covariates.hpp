#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace delaylens {

enum class Regime : std::uint8_t {
    ClosedAutocracy = 0,
    ElectoralAutocracy = 1,
    Democracy = 2,
};

std::string_view to_string(Regime r);
std::optional<Regime> regime_from_code(int code);

// Event-level covariates on the modeling scale. Logs are log1p for counts and
// distances, plain log for GDP per capita; winsorization already applied.
struct CovariateVector {
    double logGDP = 0.0;
    double logPOP = 0.0;
    double logFATALITY_cum = 0.0;
    double govcensor = 0.0;
    double selfcensor = 0.0;
    int internet = 0;  // binary
    Regime regime = Regime::ClosedAutocracy;
    double logBORDER = 0.0;
    double logPOP50km = 0.0;
    double logDISTANCE = 0.0;
    double logFATALITY_wk = 0.0;
    // Weekly event count, exposed for the model variant that includes it.
    double logEVENTS_wk = 0.0;
};

}  // namespace delaylens
