#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "delaylens/csv.hpp"
#include "delaylens/errors.hpp"
#include "delaylens/gam.hpp"
#include "delaylens/synth.hpp"

namespace delaylens {

namespace {

// All randomness flows through these two helpers so output is identical on
// every platform: mt19937_64 is fully specified, and no library distribution
// objects (whose algorithms vary) are involved.
double unit_draw(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

// Knuth's product-of-uniforms method; exact for small means.
int poisson_draw(std::mt19937_64& rng, double mean) {
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= unit_draw(rng);
    } while (p > limit);
    return k - 1;
}

constexpr double kPi = 3.14159265358979323846;

const char* kSources[] = {"SimWire", "RegionalDesk", "FieldNet"};

std::string sub_event_name(EventType type, int variant) {
    std::string base(to_string(type));
    return base + (variant == 0 ? " / pattern A" : " / pattern B");
}

}  // namespace

std::string_view to_string(HazardShape s) {
    switch (s) {
        case HazardShape::Constant: return "constant";
        case HazardShape::Decreasing: return "decreasing";
        case HazardShape::UShaped: return "u";
        case HazardShape::ReverseU: return "reverse-u";
    }
    return "constant";
}

std::optional<HazardShape> hazard_shape_from_string(std::string_view s) {
    if (s == "constant") return HazardShape::Constant;
    if (s == "decreasing") return HazardShape::Decreasing;
    if (s == "u") return HazardShape::UShaped;
    if (s == "reverse-u") return HazardShape::ReverseU;
    return std::nullopt;
}

double shape_offset(HazardShape shape, int t, int d_max, double amplitude) {
    const double u = d_max > 1 ? static_cast<double>(t - 1) / (d_max - 1) : 0.0;
    switch (shape) {
        case HazardShape::Constant: return 0.0;
        case HazardShape::Decreasing: return amplitude * (1.0 - 2.0 * u);
        case HazardShape::UShaped: return amplitude * std::cos(2.0 * kPi * u);
        case HazardShape::ReverseU: return -amplitude * std::cos(2.0 * kPi * u);
    }
    return 0.0;
}

double true_smooth_effect(const SimConfig& config, std::string_view variable, double x) {
    // Each effect integrates to zero over its covariate's sampling range, so
    // it is directly comparable with a sum-to-zero constrained estimate.
    if (variable == "logGDP") return config.amp_gdp * std::sin(kPi * (x - 9.0) / 2.0);
    if (variable == "logPOP") return config.slope_pop * (x - 15.0);
    if (variable == "logFATALITY_cum") {
        return config.amp_fatality * std::cos(kPi * (x - 3.0) / 3.0);
    }
    if (variable == "govcensor") return config.slope_govcensor * (x - 0.5);
    if (variable == "selfcensor") return config.slope_selfcensor * (x - 0.5);
    throw UsageError("no true effect is defined for '" + std::string(variable) + "'");
}

double true_eta(const SimConfig& config, const CovariateVector& cv, EventType type, int t) {
    HazardShape shape = HazardShape::Constant;
    if (const auto it = config.shapes.find(type); it != config.shapes.end()) {
        shape = it->second;
    }
    double eta = config.beta0 +
                 shape_offset(shape, t, config.d_max, config.shape_amplitude);
    eta += true_smooth_effect(config, "logGDP", cv.logGDP);
    eta += true_smooth_effect(config, "logPOP", cv.logPOP);
    eta += true_smooth_effect(config, "logFATALITY_cum", cv.logFATALITY_cum);
    eta += true_smooth_effect(config, "govcensor", cv.govcensor);
    eta += true_smooth_effect(config, "selfcensor", cv.selfcensor);
    if (cv.internet) eta += config.beta_internet;
    if (cv.regime == Regime::ElectoralAutocracy) eta += config.beta_regime_electoral;
    if (cv.regime == Regime::Democracy) eta += config.beta_regime_democracy;
    return eta;
}

double calibrate_beta0(const SimConfig& config, double target_reported) {
    if (!(target_reported > 0.0 && target_reported < 1.0)) {
        throw UsageError("target reported share must be in (0, 1)");
    }
    auto reported_share = [&](double beta0) {
        double total = 0.0;
        for (EventType type : all_event_types()) {
            HazardShape shape = HazardShape::Constant;
            if (const auto it = config.shapes.find(type); it != config.shapes.end()) {
                shape = it->second;
            }
            double log_surv = 0.0;
            for (int t = 1; t <= config.d_max; ++t) {
                const double eta =
                    beta0 + shape_offset(shape, t, config.d_max, config.shape_amplitude);
                log_surv -= std::exp(eta);
            }
            total += 1.0 - std::exp(log_surv);
        }
        return total / kNumEventTypes;
    };
    double lo = -12.0, hi = 4.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (reported_share(mid) < target_reported) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

SimConfig calibrated_preset(std::uint64_t seed, int n_events) {
    SimConfig config;
    config.seed = seed;
    config.n_countries = 20;
    config.occurrence_weeks = 20;
    config.extra_report_weeks = 30;
    config.shapes = {
        {EventType::Battles, HazardShape::Decreasing},
        {EventType::ExplosionsRemoteViolence, HazardShape::Constant},
        {EventType::Protests, HazardShape::UShaped},
        {EventType::Riots, HazardShape::ReverseU},
        {EventType::StrategicDevelopments, HazardShape::Decreasing},
        {EventType::ViolenceAgainstCivilians, HazardShape::UShaped},
    };
    config.weekly_event_rate =
        static_cast<double>(n_events) /
        (static_cast<double>(config.n_countries) * config.occurrence_weeks);
    config.beta0 = calibrate_beta0(config, 0.84);
    return config;
}

SimResult simulate_releases(const SimConfig& config) {
    if (config.n_countries < 1) throw UsageError("need at least one country");
    if (config.occurrence_weeks < 1) throw UsageError("need at least one occurrence week");
    if (config.d_max < 1) throw UsageError("horizon must be at least one week");
    if (config.hazard_override &&
        !(*config.hazard_override > 0.0 && *config.hazard_override <= 1.0)) {
        throw UsageError("hazard override must lie in (0, 1]");
    }
    if (config.weekly_event_rate <= 0.0 || config.weekly_event_rate > 1000.0) {
        throw UsageError("weekly event rate out of range");
    }

    std::mt19937_64 rng(config.seed);
    SimResult result;
    result.config = config;

    // Country table first so it is independent of event dynamics.
    std::vector<std::string> country_names;
    for (int c = 0; c < config.n_countries; ++c) {
        std::string name = "Casteria";
        name += static_cast<char>('A' + c / 26);
        name += static_cast<char>('A' + c % 26);
        CovariateVector cv;
        cv.logGDP = 7.0 + 4.0 * unit_draw(rng);
        cv.logPOP = 13.0 + 4.0 * unit_draw(rng);
        cv.logFATALITY_cum = 6.0 * unit_draw(rng);
        cv.govcensor = unit_draw(rng);
        cv.selfcensor = unit_draw(rng);
        cv.internet = below(rng, 2) == 0 ? 0 : 1;
        cv.regime = static_cast<Regime>(below(rng, 3));
        result.countries.emplace_back(name, cv);
        country_names.push_back(std::move(name));
    }

    struct PendingEvent {
        TruthEvent truth;
        double latitude;
        double longitude;
        std::int64_t fatalities;
    };
    std::vector<PendingEvent> pending;

    int seq = 0;
    for (int week = 0; week < config.occurrence_weeks; ++week) {
        for (int c = 0; c < config.n_countries; ++c) {
            const int count = poisson_draw(rng, config.weekly_event_rate);
            for (int e = 0; e < count; ++e) {
                PendingEvent ev;
                TruthEvent& truth = ev.truth;
                char idbuf[24];
                std::snprintf(idbuf, sizeof idbuf, "SYN-%07d", seq++);
                truth.event_id = idbuf;
                truth.country = country_names[static_cast<std::size_t>(c)];
                truth.event_type = static_cast<EventType>(below(rng, kNumEventTypes));
                truth.sub_event_type =
                    sub_event_name(truth.event_type, static_cast<int>(below(rng, 2)));
                truth.source = kSources[below(rng, 3)];
                truth.occurrence =
                    config.start + 7 * week + static_cast<std::int32_t>(below(rng, 7));
                truth.covariates = result.countries[static_cast<std::size_t>(c)].second;
                // Event-level fields (used by the event-level model only) vary
                // within country.
                truth.covariates.logBORDER = 6.0 * unit_draw(rng);
                truth.covariates.logPOP50km = 6.0 + 6.0 * unit_draw(rng);
                truth.covariates.logDISTANCE = 8.0 * unit_draw(rng);
                truth.covariates.logFATALITY_wk = 3.0 * unit_draw(rng);
                truth.covariates.logEVENTS_wk = 3.0 * unit_draw(rng);
                ev.latitude = -30.0 + 60.0 * unit_draw(rng);
                ev.longitude = -20.0 + 70.0 * unit_draw(rng);
                ev.fatalities = poisson_draw(rng, 0.6);

                // Sequential weekly Bernoulli trials against the true hazard,
                // the exact process the person-period model assumes.
                truth.reported = false;
                for (int t = 1; t <= config.max_report_weeks; ++t) {
                    double pi;
                    if (config.hazard_override) {
                        pi = *config.hazard_override;
                    } else {
                        pi = cloglog_inverse(
                                 true_eta(config, truth.covariates, truth.event_type, t))
                                 .pi;
                    }
                    if (unit_draw(rng) < pi) {
                        truth.reported = true;
                        truth.true_delay_weeks = t;
                        truth.report_date = truth.occurrence + 7 * t;
                        break;
                    }
                }
                pending.push_back(std::move(ev));
            }
        }
    }

    const int total_release_weeks = config.occurrence_weeks + config.extra_report_weeks;
    const Date last_release = config.start + 7 * total_release_weeks;

    if (config.inject_historical_batch) {
        // A bulk upload: one release suddenly contains a pile of very old
        // events from a single country and source.
        const Date upload_release =
            config.start + 7 * (config.occurrence_weeks + config.extra_report_weeks / 2);
        for (int i = 0; i < config.historical_batch_size; ++i) {
            PendingEvent ev;
            TruthEvent& truth = ev.truth;
            char idbuf[24];
            std::snprintf(idbuf, sizeof idbuf, "HIST-%06d", i);
            truth.event_id = idbuf;
            truth.country = country_names[0];
            truth.event_type = EventType::Battles;
            truth.sub_event_type = sub_event_name(EventType::Battles, 0);
            truth.source = "ArchiveDump";
            // 45..64 weeks before the window start, so the delay at upload is
            // far past the 40-week filter line.
            truth.occurrence = config.start - 7 * (45 + static_cast<std::int32_t>(i % 20));
            truth.covariates = result.countries[0].second;
            truth.reported = true;
            truth.report_date = upload_release;
            truth.true_delay_weeks = (upload_release - truth.occurrence) / 7;
            truth.injected = true;
            ev.latitude = 1.0;
            ev.longitude = 1.0;
            ev.fatalities = 0;
            pending.push_back(std::move(ev));
        }
    }

    // Full-download snapshots: release k contains every event reported by its
    // date. Timestamps carry the report date.
    for (int k = 0; k <= total_release_weeks; ++k) {
        const Date release_date = config.start + 7 * k;
        std::string csv =
            "event_id_cnty,event_date,country,latitude,longitude,event_type,"
            "sub_event_type,fatalities,source,timestamp\n";
        for (const PendingEvent& ev : pending) {
            if (!ev.truth.reported || ev.truth.report_date > release_date) continue;
            csv += csv_field(ev.truth.event_id);
            csv += ',';
            csv += ev.truth.occurrence.to_string();
            csv += ',';
            csv += csv_field(ev.truth.country);
            csv += ',';
            csv += format_double(ev.latitude);
            csv += ',';
            csv += format_double(ev.longitude);
            csv += ',';
            csv += csv_field(std::string(to_string(ev.truth.event_type)));
            csv += ',';
            csv += csv_field(ev.truth.sub_event_type);
            csv += ',';
            csv += std::to_string(ev.fatalities);
            csv += ',';
            csv += csv_field(ev.truth.source);
            csv += ',';
            csv += ev.truth.report_date.to_string();
            csv += '\n';
        }
        result.releases.emplace_back(release_date, std::move(csv));
    }
    (void)last_release;

    result.events.reserve(pending.size());
    for (PendingEvent& ev : pending) result.events.push_back(std::move(ev.truth));
    std::sort(result.events.begin(), result.events.end(),
              [](const TruthEvent& a, const TruthEvent& b) { return a.event_id < b.event_id; });
    result.last_occurrence_week_start = config.start + 7 * (config.occurrence_weeks - 1);
    return result;
}

std::string truth_to_json(const SimResult& result) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json cfg;
    cfg["seed"] = result.config.seed;
    cfg["start"] = result.config.start.to_string();
    cfg["n_countries"] = result.config.n_countries;
    cfg["occurrence_weeks"] = result.config.occurrence_weeks;
    cfg["extra_report_weeks"] = result.config.extra_report_weeks;
    cfg["weekly_event_rate"] = result.config.weekly_event_rate;
    cfg["d_max"] = result.config.d_max;
    cfg["beta0"] = result.config.beta0;
    cfg["shape_amplitude"] = result.config.shape_amplitude;
    nlohmann::ordered_json shapes;
    for (EventType type : all_event_types()) {
        HazardShape shape = HazardShape::Constant;
        if (const auto it = result.config.shapes.find(type); it != result.config.shapes.end()) {
            shape = it->second;
        }
        shapes[std::string(to_string(type))] = std::string(to_string(shape));
    }
    cfg["shapes"] = shapes;
    cfg["beta_internet"] = result.config.beta_internet;
    cfg["beta_regime_electoral"] = result.config.beta_regime_electoral;
    cfg["beta_regime_democracy"] = result.config.beta_regime_democracy;
    cfg["amp_gdp"] = result.config.amp_gdp;
    cfg["slope_pop"] = result.config.slope_pop;
    cfg["amp_fatality"] = result.config.amp_fatality;
    cfg["slope_govcensor"] = result.config.slope_govcensor;
    cfg["slope_selfcensor"] = result.config.slope_selfcensor;
    if (result.config.hazard_override) {
        cfg["hazard_override"] = *result.config.hazard_override;
    }
    cfg["inject_historical_batch"] = result.config.inject_historical_batch;
    cfg["historical_batch_size"] = result.config.historical_batch_size;
    j["config"] = cfg;

    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const TruthEvent& ev : result.events) {
        nlohmann::ordered_json je;
        je["event_id"] = ev.event_id;
        je["country"] = ev.country;
        je["event_type"] = std::string(to_string(ev.event_type));
        je["occurrence"] = ev.occurrence.to_string();
        je["reported"] = ev.reported;
        if (ev.reported) {
            je["report_date"] = ev.report_date.to_string();
            je["true_delay_weeks"] = ev.true_delay_weeks;
        }
        je["injected"] = ev.injected;
        events.push_back(std::move(je));
    }
    j["events"] = std::move(events);
    return j.dump(1);
}

std::string format_country_covariates_csv(const SimResult& result) {
    std::string out =
        "country,logGDP,logPOP,logFATALITY_cum,govcensor,selfcensor,internet,regime\n";
    for (const auto& [name, cv] : result.countries) {
        out += csv_field(name);
        out += ',';
        out += format_double(cv.logGDP);
        out += ',';
        out += format_double(cv.logPOP);
        out += ',';
        out += format_double(cv.logFATALITY_cum);
        out += ',';
        out += format_double(cv.govcensor);
        out += ',';
        out += format_double(cv.selfcensor);
        out += ',';
        out += std::to_string(cv.internet);
        out += ',';
        out += csv_field(std::string(to_string(cv.regime)));
        out += '\n';
    }
    return out;
}

void write_simulation(const SimResult& result, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "snapshots", ec);
    if (ec) throw UsageError("cannot create " + (dir / "snapshots").string());
    for (const auto& [date, csv] : result.releases) {
        std::ofstream out(dir / "snapshots" / (date.to_string() + ".csv"), std::ios::binary);
        if (!out) throw UsageError("cannot write snapshot under " + dir.string());
        out << csv;
    }
    {
        std::ofstream out(dir / "truth.json", std::ios::binary);
        if (!out) throw UsageError("cannot write truth ledger under " + dir.string());
        out << truth_to_json(result);
    }
    {
        std::ofstream out(dir / "covariates.csv", std::ios::binary);
        if (!out) throw UsageError("cannot write covariates under " + dir.string());
        out << format_country_covariates_csv(result);
    }
}

}  // namespace delaylens
