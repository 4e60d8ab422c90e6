#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "delaylens/cli.hpp"
#include "delaylens/csv.hpp"
#include "delaylens/delay_pipeline.hpp"
#include "delaylens/errors.hpp"
#include "delaylens/event_model.hpp"
#include "delaylens/gam.hpp"
#include "delaylens/nowcast.hpp"
#include "delaylens/survival.hpp"
#include "delaylens/synth.hpp"

namespace fs = std::filesystem;

namespace delaylens {
namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void write_text(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
}

// A bad date on the command line is a usage problem, not a data problem.
Date cli_date(const std::string& s) {
    try {
        return Date::parse(s);
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
}

EventType cli_event_type(const std::string& s) {
    if (auto t = event_type_from_string(s)) return *t;
    std::string known;
    for (EventType t : all_event_types()) {
        if (!known.empty()) known += ", ";
        known += "'" + std::string(to_string(t)) + "'";
    }
    throw UsageError("unknown event type '" + s + "' (expected one of " + known + ")");
}

std::string slug(std::string_view name) {
    std::string out;
    bool pending_dash = false;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            if (pending_dash && !out.empty()) out += '-';
            pending_dash = false;
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            pending_dash = true;
        }
    }
    return out;
}

std::vector<std::string> split_commas(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const std::string& chunk : raw) {
        std::size_t start = 0;
        while (start <= chunk.size()) {
            const std::size_t comma = chunk.find(',', start);
            const std::string piece =
                chunk.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!piece.empty()) out.push_back(piece);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return out;
}

double parse_double_field(const std::string& raw, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw DataError(where + ": '" + raw + "' is not a number");
    }
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(std::max(n, 2)));
    const int steps = std::max(n, 2) - 1;
    for (int i = 0; i <= steps; ++i) {
        out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(steps));
    }
    return out;
}

// Option values after merging config file and flags; flags win inside CLI11.
std::map<std::string, std::string> resolved_config(const CLI::App& cmd) {
    std::map<std::string, std::string> out;
    for (const CLI::Option* opt : cmd.get_options()) {
        const std::string& name = opt->get_single_name();
        if (name == "config" || name == "help") continue;
        std::string value;
        if (opt->count() > 0) {
            const auto& results = opt->results();
            for (std::size_t i = 0; i < results.size(); ++i) {
                if (i) value += ',';
                value += results[i];
            }
        } else {
            value = opt->get_default_str();
        }
        out[name] = value;
    }
    return out;
}

bool truthy(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw UsageError("config key '" + key + "' is a flag; use true or false, got '" + value +
                     "'");
}

std::string strip_ws(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

// Turns `--config file` into extra command-line tokens before CLI11 parses,
// skipping every key already given as a flag. Values from the file therefore
// never override explicit flags.
std::vector<std::string> expand_config_args(CLI::App& app, std::vector<std::string> args) {
    std::size_t sub_index = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (!args[i].empty() && args[i][0] != '-') {
            sub_index = i;
            break;
        }
    }
    if (sub_index == args.size()) return args;
    const CLI::App* sub = app.get_subcommand_no_throw(args[sub_index]);
    if (!sub) return args;

    std::string config_path;
    std::vector<std::string> given;
    for (std::size_t i = sub_index + 1; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0) continue;
        const std::size_t eq = arg.find('=');
        const std::string name = eq == std::string::npos ? arg : arg.substr(0, eq);
        given.push_back(name);
        if (name == "--config") {
            if (eq != std::string::npos) {
                config_path = arg.substr(eq + 1);
            } else if (i + 1 < args.size()) {
                config_path = args[i + 1];
            }
        }
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot read config file '" + config_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = strip_ws(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        const std::size_t eq = text.find('=');
        const std::string where = config_path + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw UsageError(where + ": expected key=value");
        const std::string key = strip_ws(text.substr(0, eq));
        std::string value = strip_ws(text.substr(eq + 1));
        if (key.empty()) throw UsageError(where + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        const std::string flag = "--" + key;
        if (std::find(given.begin(), given.end(), flag) != given.end()) continue;
        const CLI::Option* opt = sub->get_option_no_throw(flag);
        if (!opt || flag == "--config") {
            throw UsageError(where + ": '" + key + "' is not an option of '" +
                             args[sub_index] + "'");
        }
        if (opt->get_type_size_max() == 0) {
            if (truthy(value, key)) args.push_back(flag);
        } else {
            args.push_back(flag + "=" + value);
        }
        given.push_back(flag);
    }
    return args;
}

void add_config_option(CLI::App* sub, std::string& target) {
    // Applied by expand_config_args before parsing, not by CLI11 itself.
    sub->add_option("--config", target, "key=value configuration file; command-line flags win")
        ->check(CLI::ExistingFile);
}

// --- ingest -------------------------------------------------------------------

struct IngestOpts {
    std::string config;
    std::string snapshots;
    std::string store;
    bool strict = false;
};

void cmd_ingest(const IngestOpts& opts, const CLI::App& sub) {
    std::vector<std::pair<Date, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(opts.snapshots)) {
        if (!entry.is_regular_file()) continue;
        const fs::path& p = entry.path();
        if (p.extension() != ".csv") continue;
        const auto date = Date::try_parse(p.stem().string());
        if (!date) {
            throw UsageError("snapshot file '" + p.filename().string() +
                             "' is not named YYYY-MM-DD.csv");
        }
        files.emplace_back(*date, p);
    }
    if (files.empty()) {
        throw UsageError("no snapshot files named YYYY-MM-DD.csv in '" + opts.snapshots + "'");
    }
    std::sort(files.begin(), files.end());

    // The store belongs to this command; rebuild it from scratch so reruns
    // produce the same bytes.
    const fs::path store(opts.store);
    fs::create_directories(store);
    fs::remove_all(store / "releases");
    fs::remove(store / "index.json");
    fs::remove(store / "ingest-report.json");
    fs::remove(store / "run-manifest.json");

    nlohmann::ordered_json report;
    report["releases"] = nlohmann::ordered_json::array();
    std::size_t total_rejects = 0;
    for (const auto& [date, path] : files) {
        const std::vector<RowReject> rejects =
            store_ingest(store, read_file(path), date, opts.strict);
        total_rejects += rejects.size();
        nlohmann::ordered_json entry;
        entry["date"] = date.to_string();
        entry["rejected"] = rejects.size();
        entry["rejects"] = nlohmann::ordered_json::array();
        for (const RowReject& r : rejects) {
            entry["rejects"].push_back({{"row", r.row}, {"field", r.field}, {"reason", r.reason}});
        }
        report["releases"].push_back(std::move(entry));
    }
    write_text(store / "ingest-report.json", report.dump(1) + "\n");

    RunManifest manifest;
    manifest.command = "ingest";
    manifest.config = resolved_config(sub);
    manifest.add_input(opts.snapshots);
    for (const auto& [date, path] : files) {
        manifest.add_output(store, "releases/" + date.to_string() + ".csv");
    }
    manifest.add_output(store, "index.json");
    manifest.add_output(store, "ingest-report.json");
    write_run_manifest(store, manifest);

    std::cout << "ingested " << files.size() << " release(s) into " << opts.store << " ("
              << total_rejects << " rejected row(s))\n";
}

// --- delays -------------------------------------------------------------------

struct DelaysOpts {
    std::string config;
    std::string store;
    std::string out;
    std::string window_start;
    std::string window_end;
    int dmax = 20;
    int historical_threshold = 40;
    int historical_min = 100;
    bool keep_historical = false;
    bool exclude_pre_window = false;
    int reference_year = 0;
    int min_country_events = 10;
    std::vector<std::string> exclude_countries;
};

void cmd_delays(const DelaysOpts& opts, const CLI::App& sub) {
    const SnapshotStore store = store_load(opts.store);
    CleaningConfig config;
    config.d_max = opts.dmax;
    config.historical_delay_threshold = opts.historical_threshold;
    config.historical_batch_min = opts.historical_min;
    config.country_min_events = opts.min_country_events;
    config.country_exclusions = split_commas(opts.exclude_countries);
    config.include_pre_window_occurrences = !opts.exclude_pre_window;

    const Date start = cli_date(opts.window_start);
    const Date end = cli_date(opts.window_end);
    DelayDataset dataset = build_delay_dataset(store, start, end, config);
    std::vector<DelayRecord> records = std::move(dataset.records);

    std::vector<RemovedBatch> removed;
    if (!opts.keep_historical) {
        HistoricalFilterResult filtered = filter_historical_batches(records, config);
        records = std::move(filtered.kept);
        removed = std::move(filtered.removed);
    }

    std::map<std::string, std::size_t> dropped_by_country;
    std::vector<std::string> missing_reference;
    if (opts.reference_year > 0) {
        const auto counts = reference_year_counts(store, opts.reference_year, end);
        CountryFilterResult filtered = filter_countries(records, counts, config);
        records = std::move(filtered.kept);
        dropped_by_country = std::move(filtered.dropped_by_country);
        missing_reference = std::move(filtered.missing_reference);
    } else if (!config.country_exclusions.empty()) {
        std::erase_if(records, [&](const DelayRecord& r) {
            const bool drop = std::find(config.country_exclusions.begin(),
                                        config.country_exclusions.end(),
                                        r.country) != config.country_exclusions.end();
            if (drop) ++dropped_by_country[r.country];
            return drop;
        });
    }

    const fs::path out(opts.out);
    fs::create_directories(out);
    write_text(out / "delays.csv", format_delays_csv(records));

    nlohmann::ordered_json batches = nlohmann::ordered_json::array();
    for (const RemovedBatch& b : removed) {
        batches.push_back({{"first_seen", b.first_seen.to_string()},
                           {"country", b.country},
                           {"source", b.source},
                           {"size", b.size},
                           {"long_delay_count", b.long_delay_count},
                           {"reason", "bulk upload of long-delayed records"}});
    }
    write_text(out / "removed-batches.json", batches.dump(1) + "\n");

    nlohmann::ordered_json rejects;
    rejects["chronology"] = nlohmann::ordered_json::array();
    for (const DelayReject& r : dataset.rejects) {
        rejects["chronology"].push_back({{"event_id", r.event_id}, {"reason", r.reason}});
    }
    rejects["dropped_by_country"] = dropped_by_country;
    rejects["missing_reference"] = missing_reference;
    write_text(out / "rejects.json", rejects.dump(1) + "\n");

    RunManifest manifest;
    manifest.command = "delays";
    manifest.config = resolved_config(sub);
    manifest.add_input(opts.store);
    manifest.add_output(out, "delays.csv");
    manifest.add_output(out, "removed-batches.json");
    manifest.add_output(out, "rejects.json");
    write_run_manifest(out, manifest);

    std::size_t dropped = 0;
    for (const auto& [country, n] : dropped_by_country) dropped += n;
    std::cout << "delays.csv: " << records.size() << " record(s), " << dataset.rejects.size()
              << " chronology reject(s), " << removed.size() << " historical batch(es) removed, "
              << dropped << " record(s) dropped by country rules\n";
}

// --- km -----------------------------------------------------------------------

struct KmOpts {
    std::string config;
    std::string delays;
    std::string out;
    int horizon = 20;
    bool by_type = false;
    bool uncapped = false;
    bool with_se = false;
};

void cmd_km(const KmOpts& opts, const CLI::App& sub) {
    const std::vector<DelayRecord> records = parse_delays_csv(read_file(opts.delays));
    const fs::path out(opts.out);
    fs::create_directories(out);

    std::string csv;
    std::size_t blocks = 1;
    if (opts.by_type) {
        std::ostringstream os;
        os << (opts.with_se ? "event_type,t,n_risk,events,hazard,survival,se\n"
                            : "event_type,t,n_risk,events,hazard,survival\n");
        blocks = 0;
        for (EventType type : all_event_types()) {
            std::vector<DelayRecord> subset;
            for (const DelayRecord& r : records) {
                if (r.event_type == type) subset.push_back(r);
            }
            if (subset.empty()) {
                std::cerr << "warning: no records of type '" << to_string(type) << "'\n";
                continue;
            }
            ++blocks;
            const KMCurve curve = kaplan_meier(subset, opts.horizon, opts.uncapped);
            for (const KMRow& row : curve) {
                std::vector<std::string> fields{
                    std::string(to_string(type)), std::to_string(row.t),
                    std::to_string(row.n_risk),   std::to_string(row.events),
                    format_double(row.hazard),    format_double(row.survival)};
                if (opts.with_se) {
                    fields.push_back(std::isfinite(row.se) ? format_double(row.se) : "");
                }
                write_csv_row(os, fields, ',');
            }
        }
        csv = std::move(os).str();
    } else {
        csv = format_km_csv(kaplan_meier(records, opts.horizon, opts.uncapped), opts.with_se);
    }
    write_text(out / "km.csv", csv);

    RunManifest manifest;
    manifest.command = "km";
    manifest.config = resolved_config(sub);
    manifest.add_input(opts.delays);
    manifest.add_output(out, "km.csv");
    write_run_manifest(out, manifest);

    std::cout << "km.csv: horizon " << opts.horizon << ", " << blocks << " curve(s)\n";
}

// --- fit ------------------------------------------------------------------------

struct FitOpts {
    std::string config;
    std::string delays;
    std::string covariates;
    std::string model;
    std::string out;
    std::string country;
    bool weekly_events = false;
    int k = 10;
    int dmax = 20;
    bool quantile_knots = false;
    bool shared_baseline_lambda = false;
    std::string fixed_lambda;
    int max_outer = 10;
    double coord_tol = 0.05;
    int max_iter = 200;
    double tol = 1e-8;
};

int parse_internet(const std::string& raw, const std::string& where) {
    if (raw == "0" || raw == "false") return 0;
    if (raw == "1" || raw == "true") return 1;
    throw DataError(where + ": internet must be 0/1/true/false, got '" + raw + "'");
}

Regime parse_regime(const std::string& raw, const std::string& where) {
    if (raw.size() == 1 && raw[0] >= '0' && raw[0] <= '9') {
        if (auto r = regime_from_code(raw[0] - '0')) return *r;
    }
    for (int code = 0; code < 3; ++code) {
        const Regime r = static_cast<Regime>(code);
        if (raw == to_string(r)) return r;
    }
    throw DataError(where + ": unknown regime '" + raw +
                    "' (expected 0..2 or the category name)");
}

// Covariates joined by event_id when that column exists, by country otherwise.
std::vector<CovariateVector> join_covariates(const std::vector<DelayRecord>& records,
                                             const CsvTable& table, const ModelSpec& spec) {
    std::vector<std::string> required;
    for (const SmoothTermSpec& term : spec.smooths) required.push_back(term.variable);
    if (spec.internet_linear) required.push_back("internet");
    if (spec.regime_linear) required.push_back("regime");
    for (const std::string& name : required) table.require_column(name);

    const bool by_event = table.column("event_id") >= 0;
    const int key_col = by_event ? table.column("event_id") : table.require_column("country");

    std::map<std::string, std::size_t> row_by_key;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i].size() != table.header.size()) {
            throw DataError("covariates row " + std::to_string(i + 1) + ": wrong field count");
        }
        const std::string& key = table.rows[i][static_cast<std::size_t>(key_col)];
        if (!row_by_key.emplace(key, i).second) {
            throw DataError("covariates: duplicate key '" + key + "'");
        }
    }

    struct Column {
        std::string name;
        int index;
    };
    static const char* kNumeric[] = {"logGDP",     "logPOP",       "logFATALITY_cum",
                                     "govcensor",  "selfcensor",   "logBORDER",
                                     "logPOP50km", "logDISTANCE",  "logFATALITY_wk",
                                     "logEVENTS_wk"};
    std::vector<Column> numeric;
    for (const char* name : kNumeric) {
        const int idx = table.column(name);
        if (idx >= 0) numeric.push_back({name, idx});
    }
    const int c_internet = table.column("internet");
    const int c_regime = table.column("regime");

    std::vector<CovariateVector> out;
    out.reserve(records.size());
    for (const DelayRecord& rec : records) {
        const std::string& key = by_event ? rec.event_id : rec.country;
        const auto it = row_by_key.find(key);
        if (it == row_by_key.end()) {
            throw DataError("covariates: no row for " +
                            std::string(by_event ? "event '" : "country '") + key + "'");
        }
        const auto& row = table.rows[it->second];
        const std::string where = "covariates row " + std::to_string(it->second + 1);
        CovariateVector cv;
        for (const Column& col : numeric) {
            const double v =
                parse_double_field(row[static_cast<std::size_t>(col.index)], where);
            if (col.name == "logGDP") cv.logGDP = v;
            else if (col.name == "logPOP") cv.logPOP = v;
            else if (col.name == "logFATALITY_cum") cv.logFATALITY_cum = v;
            else if (col.name == "govcensor") cv.govcensor = v;
            else if (col.name == "selfcensor") cv.selfcensor = v;
            else if (col.name == "logBORDER") cv.logBORDER = v;
            else if (col.name == "logPOP50km") cv.logPOP50km = v;
            else if (col.name == "logDISTANCE") cv.logDISTANCE = v;
            else if (col.name == "logFATALITY_wk") cv.logFATALITY_wk = v;
            else cv.logEVENTS_wk = v;
        }
        if (c_internet >= 0) {
            cv.internet = parse_internet(row[static_cast<std::size_t>(c_internet)], where);
        }
        if (c_regime >= 0) {
            cv.regime = parse_regime(row[static_cast<std::size_t>(c_regime)], where);
        }
        out.push_back(cv);
    }
    return out;
}

void cmd_fit(const FitOpts& opts, const CLI::App& sub) {
    std::vector<DelayRecord> records = parse_delays_csv(read_file(opts.delays));
    if (!opts.country.empty()) {
        std::erase_if(records,
                      [&](const DelayRecord& r) { return r.country != opts.country; });
        if (records.empty()) {
            throw DataError("no delay records for country '" + opts.country + "'");
        }
    }

    ModelSpec spec;
    if (opts.model == "m1") {
        spec = m1_spec();
    } else if (opts.model == "m2") {
        spec = m2_spec(opts.weekly_events);
    } else {
        throw UsageError("--model must be m1 or m2, got '" + opts.model + "'");
    }
    spec.d_max = opts.dmax;
    spec.baseline.k = opts.k;
    for (SmoothTermSpec& term : spec.smooths) term.k = opts.k;
    if (opts.quantile_knots) spec.knot_placement = KnotPlacement::Quantile;
    spec.shared_baseline_lambda = opts.shared_baseline_lambda;

    const CsvTable table = parse_csv_auto(read_file(opts.covariates));
    const std::vector<CovariateVector> covariates = join_covariates(records, table, spec);
    const std::vector<PersonPeriodRow> rows = expand_dataset(records, opts.dmax, covariates);

    FitOptions options;
    options.select.max_outer = opts.max_outer;
    options.select.coord_tol = opts.coord_tol;
    options.pirls.max_iter = opts.max_iter;
    options.pirls.tol = opts.tol;
    if (!opts.fixed_lambda.empty()) {
        std::vector<double> lambda;
        for (const std::string& piece : split_commas({opts.fixed_lambda})) {
            lambda.push_back(parse_double_field(piece, "--fixed-lambda"));
        }
        options.fixed_lambda = std::move(lambda);
    }

    const FitResult fit = fit_model(spec, rows, options);
    for (const std::string& w : fit.warnings) std::cerr << "warning: " << w << '\n';

    const fs::path out(opts.out);
    fs::create_directories(out);
    write_text(out / "fit.json", fit_to_json(fit));
    write_text(out / "table.csv", format_coefficient_csv(coefficient_table(fit)));

    RunManifest manifest;
    manifest.command = "fit";
    manifest.config = resolved_config(sub);
    manifest.add_input(opts.delays);
    manifest.add_input(opts.covariates);
    manifest.add_output(out, "fit.json");
    manifest.add_output(out, "table.csv");
    write_run_manifest(out, manifest);

    std::cout << "fit.json: " << fit.spec.name << ", " << fit.n_rows << " person-period rows, "
              << fit.n_events << " events, " << fit.n_cols() << " columns\n";
    std::cout << "deviance " << format_double(fit.deviance) << ", edf "
              << format_double(fit.edf_total) << ", gcv " << format_double(fit.gcv) << ", "
              << fit.pirls_iterations << " scoring iterations\n";
    for (std::size_t i = 0; i < fit.lambda.size(); ++i) {
        std::cout << "lambda[" << fit.penalty_names[i] << "] = " << format_double(fit.lambda[i])
                  << '\n';
    }
}

// --- curves ---------------------------------------------------------------------

struct CurvesOpts {
    std::string config;
    std::string fit;
    std::string out;
    int points = 200;
};

void cmd_curves(const CurvesOpts& opts, const CLI::App& sub) {
    const FitResult fit = fit_from_json(read_file(opts.fit));
    const fs::path out(opts.out);
    fs::create_directories(out);

    std::vector<std::string> written;
    for (const DesignBlock& block : fit.blocks) {
        if (block.kind != BlockKind::Smooth) continue;
        std::string name;
        std::string csv;
        if (block.event_type_level >= 0) {
            const EventType type = static_cast<EventType>(block.event_type_level);
            name = "baseline-" + slug(to_string(type)) + ".csv";
            csv = format_curve_csv(baseline_hazard_curve(fit, type));
        } else {
            const std::vector<double> grid =
                block.dropped_to_linear
                    ? linspace(block.center - 1.0, block.center + 1.0, opts.points)
                    : linspace(block.basis.x_min, block.basis.x_max, opts.points);
            name = "partial-" + block.variable + ".csv";
            csv = format_curve_csv(partial_effect(fit, block.name, grid).points);
        }
        write_text(out / name, csv);
        written.push_back(name);
    }
    if (written.empty()) throw DataError("the fit has no smooth terms to plot");

    RunManifest manifest;
    manifest.command = "curves";
    manifest.config = resolved_config(sub);
    manifest.add_input(opts.fit);
    for (const std::string& name : written) manifest.add_output(out, name);
    write_run_manifest(out, manifest);

    std::cout << "wrote " << written.size() << " curve file(s)\n";
}

// --- nowcast --------------------------------------------------------------------

struct NowcastOpts {
    std::string config;
    std::string delays;
    std::string out;
    std::string as_of;
    std::string fit;
    std::string type;
    int dmax = 20;
    double floor = 0.05;
    bool ci = false;
};

void cmd_nowcast(const NowcastOpts& opts, const CLI::App& sub) {
    const std::vector<DelayRecord> records = parse_delays_csv(read_file(opts.delays));

    std::vector<double> hazards;
    if (!opts.fit.empty()) {
        const FitResult fit = fit_from_json(read_file(opts.fit));
        const std::vector<CurvePoint> curve =
            baseline_hazard_curve(fit, cli_event_type(opts.type));
        hazards.reserve(curve.size());
        for (const CurvePoint& p : curve) hazards.push_back(p.estimate);
    } else {
        hazards = empirical_cdf_hazards(records, opts.dmax);
    }
    const ReportingCDF cdf = reporting_cdf(hazards);

    NowcastOptions nopts;
    nopts.f_floor = opts.floor;
    nopts.with_ci = opts.ci;
    const NowcastResult result =
        correct_counts(weekly_occurrence_counts(records), cli_date(opts.as_of), cdf, nopts);
    for (const std::string& w : result.warnings) std::cerr << "warning: " << w << '\n';

    const fs::path out(opts.out);
    fs::create_directories(out);
    write_text(out / "nowcast.csv", format_nowcast_csv(result, opts.ci));

    RunManifest manifest;
    manifest.command = "nowcast";
    manifest.config = resolved_config(sub);
    manifest.add_input(opts.delays);
    if (!opts.fit.empty()) manifest.add_input(opts.fit);
    manifest.add_output(out, "nowcast.csv");
    write_run_manifest(out, manifest);

    std::size_t refused = 0;
    for (const NowcastRow& row : result.rows) refused += row.refused ? 1 : 0;
    std::cout << "nowcast.csv: " << result.rows.size() << " week(s), " << refused
              << " refused\n";
}

// --- simulate -------------------------------------------------------------------

struct SimulateOpts {
    std::string config;
    std::string out;
    std::uint64_t seed = 1;
    int preset_events = 0;
    std::string start = "2024-01-01";
    int countries = 12;
    int weeks = 16;
    int extra_weeks = 30;
    double rate = 3.0;
    int dmax = 20;
    double beta0 = -2.0;
    double hazard_override = -1.0;
    bool calibrate = false;
    std::vector<std::string> shapes;
    bool inject_historical = false;
    int historical_size = 120;
};

void cmd_simulate(const SimulateOpts& opts, const CLI::App& sub) {
    SimConfig config;
    if (opts.preset_events > 0) {
        config = calibrated_preset(opts.seed, opts.preset_events);
    } else {
        config.seed = opts.seed;
        config.n_countries = opts.countries;
        config.occurrence_weeks = opts.weeks;
        config.extra_report_weeks = opts.extra_weeks;
        config.weekly_event_rate = opts.rate;
        config.d_max = opts.dmax;
        config.beta0 = opts.beta0;
        if (opts.hazard_override >= 0.0) config.hazard_override = opts.hazard_override;
        for (const std::string& entry : opts.shapes) {
            const std::size_t eq = entry.rfind('=');
            if (eq == std::string::npos) {
                throw UsageError("--shape expects 'Event type=shape', got '" + entry + "'");
            }
            const EventType type = cli_event_type(entry.substr(0, eq));
            const auto shape = hazard_shape_from_string(entry.substr(eq + 1));
            if (!shape) {
                throw UsageError("unknown hazard shape '" + entry.substr(eq + 1) + "'");
            }
            config.shapes[type] = *shape;
        }
        if (opts.calibrate) config.beta0 = calibrate_beta0(config);
    }
    config.start = cli_date(opts.start);
    config.inject_historical_batch = opts.inject_historical;
    config.historical_batch_size = opts.historical_size;

    const SimResult result = simulate_releases(config);
    const fs::path out(opts.out);
    fs::remove_all(out / "snapshots");
    write_simulation(result, out);

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.config = resolved_config(sub);
    manifest.outputs["snapshots"] = sha256_tree(out / "snapshots");
    manifest.add_output(out, "truth.json");
    manifest.add_output(out, "covariates.csv");
    write_run_manifest(out, manifest);

    std::cout << "simulated " << result.events.size() << " event(s) over "
              << result.releases.size() << " release(s) with seed " << config.seed << '\n';
}

// --- report ---------------------------------------------------------------------

struct ReportOpts {
    std::string config;
    std::string delays;
    std::string covariates;
    std::string out;
};

void cmd_report(const ReportOpts& opts, const CLI::App& sub) {
    const std::vector<DelayRecord> records = parse_delays_csv(read_file(opts.delays));
    if (records.empty()) throw DataError("the delay dataset is empty");

    std::vector<SummaryVariable> variables;
    SummaryVariable delay{"Delay (weeks)", {}};
    SummaryVariable uncapped{"Uncapped delay (weeks)", {}};
    SummaryVariable fatalities{"Fatalities", {}};
    for (const DelayRecord& r : records) {
        delay.values.push_back(r.delay_weeks);
        uncapped.values.push_back(r.uncapped_weeks);
        fatalities.values.push_back(static_cast<double>(r.fatalities));
    }
    variables.push_back(std::move(delay));
    variables.push_back(std::move(uncapped));
    variables.push_back(std::move(fatalities));

    if (!opts.covariates.empty()) {
        const CsvTable table = parse_csv_auto(read_file(opts.covariates));
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            const std::string& name = table.header[c];
            if (name == "event_id" || name == "country" || name == "regime") continue;
            SummaryVariable v{name, {}};
            v.values.reserve(table.rows.size());
            for (std::size_t i = 0; i < table.rows.size(); ++i) {
                v.values.push_back(parse_double_field(
                    table.rows[i][c], "covariates row " + std::to_string(i + 1) + " column " +
                                          name));
            }
            variables.push_back(std::move(v));
        }
    }

    const fs::path out(opts.out);
    fs::create_directories(out);
    write_text(out / "summary.md", summary_markdown(variables));

    RunManifest manifest;
    manifest.command = "report";
    manifest.config = resolved_config(sub);
    manifest.add_input(opts.delays);
    if (!opts.covariates.empty()) manifest.add_input(opts.covariates);
    manifest.add_output(out, "summary.md");
    write_run_manifest(out, manifest);

    std::cout << "summary.md: " << variables.size() << " variable(s)\n";
}

// --- fetch ----------------------------------------------------------------------

struct FetchOpts {
    std::string config;
    std::string url_template;
    std::vector<std::string> dates;
    std::string out;
};

void cmd_fetch(const FetchOpts& opts, const CLI::App& sub) {
    const char* token = std::getenv("DELAYLENS_TOKEN");
    if (!token || !*token) {
        throw UsageError("DELAYLENS_TOKEN is not set; export the API token first");
    }
    const fs::path out(opts.out);
    const std::vector<std::string> files =
        fetch_releases(opts.url_template, split_commas(opts.dates), token, out);

    RunManifest manifest;
    manifest.command = "fetch";
    manifest.config = resolved_config(sub);
    for (const std::string& name : files) manifest.add_output(out, name);
    write_run_manifest(out, manifest);

    std::cout << "fetched " << files.size() << " release(s)\n";
}

// --- wiring ---------------------------------------------------------------------

void register_ingest(CLI::App& app) {
    auto opts = std::make_shared<IngestOpts>();
    CLI::App* sub =
        app.add_subcommand("ingest", "load dated snapshot files into a release store");
    add_config_option(sub, opts->config);
    sub->add_option("--snapshots", opts->snapshots, "directory of YYYY-MM-DD.csv snapshot files")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("--store", opts->store, "release store directory (rebuilt on every run)")
        ->required();
    sub->add_flag("--strict", opts->strict, "escalate any rejected row to an error");
    sub->callback([opts, sub] { cmd_ingest(*opts, *sub); });
}

void register_delays(CLI::App& app) {
    auto opts = std::make_shared<DelaysOpts>();
    CLI::App* sub = app.add_subcommand(
        "delays", "diff releases into newly reported events and compute reporting delays");
    add_config_option(sub, opts->config);
    sub->add_option("--store", opts->store, "release store directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->add_option("--window-start", opts->window_start,
                    "baseline release date (events already present are not new)")
        ->required();
    sub->add_option("--window-end", opts->window_end, "last release date considered")
        ->required();
    sub->add_option("--dmax", opts->dmax, "censoring horizon in weeks")->capture_default_str();
    sub->add_option("--historical-threshold", opts->historical_threshold,
                    "delay in weeks beyond which a record counts as historical")
        ->capture_default_str();
    sub->add_option("--historical-min", opts->historical_min,
                    "minimum long-delayed records that mark a batch for removal")
        ->capture_default_str();
    sub->add_flag("--keep-historical", opts->keep_historical,
                  "skip the historical batch filter");
    sub->add_flag("--exclude-pre-window", opts->exclude_pre_window,
                  "drop events that occurred before the window start");
    sub->add_option("--reference-year", opts->reference_year,
                    "apply the reference-count country filter using this year");
    sub->add_option("--min-country-events", opts->min_country_events,
                    "reference events required to keep a country")
        ->capture_default_str();
    sub->add_option("--exclude-country", opts->exclude_countries,
                    "country to drop (repeatable or comma separated)");
    sub->callback([opts, sub] { cmd_delays(*opts, *sub); });
}

void register_km(CLI::App& app) {
    auto opts = std::make_shared<KmOpts>();
    CLI::App* sub =
        app.add_subcommand("km", "product-limit estimate of the reporting-delay survival");
    add_config_option(sub, opts->config);
    sub->add_option("--delays", opts->delays, "delays.csv from the delays command")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->add_option("--horizon", opts->horizon, "weeks to tabulate")->capture_default_str();
    sub->add_flag("--by-type", opts->by_type, "one curve per event type");
    sub->add_flag("--uncapped", opts->uncapped,
                  "use uncapped week counts (long-horizon view, no censoring)");
    sub->add_flag("--se", opts->with_se, "include the Greenwood standard error column");
    sub->callback([opts, sub] { cmd_km(*opts, *sub); });
}

void register_fit(CLI::App& app) {
    auto opts = std::make_shared<FitOpts>();
    CLI::App* sub = app.add_subcommand(
        "fit", "penalized-spline discrete-time hazard model of reporting delays");
    add_config_option(sub, opts->config);
    sub->add_option("--delays", opts->delays, "delays.csv from the delays command")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--covariates", opts->covariates,
                    "covariate table keyed by event_id or country")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--model", opts->model, "m1 (country level) or m2 (event level)")
        ->required();
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->add_option("--country", opts->country, "restrict the fit to one country");
    sub->add_flag("--weekly-events", opts->weekly_events,
                  "include the weekly event-count smooth (m2 variant)");
    sub->add_option("--k", opts->k, "basis dimension per smooth")->capture_default_str();
    sub->add_option("--dmax", opts->dmax, "censoring horizon in weeks")->capture_default_str();
    sub->add_flag("--quantile-knots", opts->quantile_knots,
                  "place interior knots at covariate quantiles");
    sub->add_flag("--shared-baseline-lambda", opts->shared_baseline_lambda,
                  "one smoothing parameter across the event-type baselines");
    sub->add_option("--fixed-lambda", opts->fixed_lambda,
                    "comma-separated smoothing parameters; skips selection");
    sub->add_option("--max-outer", opts->max_outer, "smoothing-selection sweeps")
        ->capture_default_str();
    sub->add_option("--coord-tol", opts->coord_tol,
                    "golden-section interval width on log10 lambda")
        ->capture_default_str();
    sub->add_option("--max-iter", opts->max_iter, "scoring iteration cap")
        ->capture_default_str();
    sub->add_option("--tol", opts->tol, "relative penalized-deviance tolerance")
        ->capture_default_str();
    sub->callback([opts, sub] { cmd_fit(*opts, *sub); });
}

void register_curves(CLI::App& app) {
    auto opts = std::make_shared<CurvesOpts>();
    CLI::App* sub = app.add_subcommand(
        "curves", "baseline hazard and partial-effect curves from a saved fit");
    add_config_option(sub, opts->config);
    sub->add_option("--fit", opts->fit, "fit.json from the fit command")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->add_option("--points", opts->points, "grid points per partial-effect curve")
        ->capture_default_str();
    sub->callback([opts, sub] { cmd_curves(*opts, *sub); });
}

void register_nowcast(CLI::App& app) {
    auto opts = std::make_shared<NowcastOpts>();
    CLI::App* sub = app.add_subcommand(
        "nowcast", "correct recent weekly counts for not-yet-reported events");
    add_config_option(sub, opts->config);
    sub->add_option("--delays", opts->delays, "delays.csv from the delays command")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->add_option("--as-of", opts->as_of, "correction reference date")->required();
    CLI::Option* fit_opt = sub->add_option("--fit", opts->fit,
                                           "use model baseline hazards from this fit.json")
                               ->check(CLI::ExistingFile);
    CLI::Option* type_opt = sub->add_option(
        "--type", opts->type, "event type whose baseline hazards drive the correction");
    fit_opt->needs(type_opt);
    type_opt->needs(fit_opt);
    sub->add_option("--dmax", opts->dmax, "horizon of the empirical reporting distribution")
        ->capture_default_str();
    sub->add_option("--floor", opts->floor,
                    "minimum reporting probability; weeks below it are flagged, not scaled")
        ->capture_default_str();
    sub->add_flag("--ci", opts->ci, "include a 95% interval for the corrected count");
    sub->callback([opts, sub] { cmd_nowcast(*opts, *sub); });
}

void register_simulate(CLI::App& app) {
    auto opts = std::make_shared<SimulateOpts>();
    CLI::App* sub = app.add_subcommand(
        "simulate", "deterministic synthetic snapshot sequence with a truth ledger");
    add_config_option(sub, opts->config);
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->add_option("--seed", opts->seed, "random seed")->capture_default_str();
    CLI::Option* preset =
        sub->add_option("--preset-events", opts->preset_events,
                        "use the calibrated preset sized to about this many events");
    sub->add_option("--start", opts->start, "first occurrence week (a Monday)")
        ->capture_default_str();
    CLI::Option* countries =
        sub->add_option("--countries", opts->countries, "number of synthetic countries")
            ->capture_default_str();
    CLI::Option* weeks = sub->add_option("--weeks", opts->weeks, "occurrence weeks")
                             ->capture_default_str();
    CLI::Option* extra =
        sub->add_option("--extra-weeks", opts->extra_weeks, "release weeks after the last occurrence")
            ->capture_default_str();
    CLI::Option* rate =
        sub->add_option("--rate", opts->rate, "mean events per country and week")
            ->capture_default_str();
    CLI::Option* dmax = sub->add_option("--dmax", opts->dmax, "censoring horizon in weeks")
                            ->capture_default_str();
    CLI::Option* beta0 =
        sub->add_option("--beta0", opts->beta0, "reporting-hazard intercept")
            ->capture_default_str();
    CLI::Option* override_opt = sub->add_option(
        "--hazard-override", opts->hazard_override,
        "constant weekly reporting hazard in (0,1]; replaces the model truth");
    CLI::Option* calibrate = sub->add_flag(
        "--calibrate", opts->calibrate, "solve for beta0 so about 84% report by the horizon");
    CLI::Option* shape = sub->add_option(
        "--shape", opts->shapes, "baseline shape per type, e.g. 'Battles=decreasing'");
    for (CLI::Option* opt : {countries, weeks, extra, rate, dmax, beta0, override_opt,
                             calibrate, shape}) {
        preset->excludes(opt);
    }
    sub->add_flag("--inject-historical", opts->inject_historical,
                  "add one bulk upload of very old events");
    sub->add_option("--historical-size", opts->historical_size,
                    "events in the injected batch")
        ->capture_default_str();
    sub->callback([opts, sub] { cmd_simulate(*opts, *sub); });
}

void register_report(CLI::App& app) {
    auto opts = std::make_shared<ReportOpts>();
    CLI::App* sub =
        app.add_subcommand("report", "summary-statistics table for a delay dataset");
    add_config_option(sub, opts->config);
    sub->add_option("--delays", opts->delays, "delays.csv from the delays command")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--covariates", opts->covariates, "optional covariate table to summarize")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->callback([opts, sub] { cmd_report(*opts, *sub); });
}

void register_fetch(CLI::App& app) {
    auto opts = std::make_shared<FetchOpts>();
    CLI::App* sub = app.add_subcommand(
        "fetch", "download releases from a URL template (needs DELAYLENS_TOKEN)");
    add_config_option(sub, opts->config);
    sub->add_option("--url-template", opts->url_template,
                    "release URL with a {date} placeholder")
        ->required();
    sub->add_option("--dates", opts->dates, "release dates (repeatable or comma separated)")
        ->required();
    sub->add_option("--out", opts->out, "output directory")->required();
    sub->callback([opts, sub] { cmd_fetch(*opts, *sub); });
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"reporting-delay measurement and discrete-time survival modeling "
                 "from versioned event-dataset snapshots"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    register_ingest(app);
    register_delays(app);
    register_km(app);
    register_fit(app);
    register_curves(app);
    register_nowcast(app);
    register_simulate(app);
    register_report(app);
    register_fetch(app);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config_args(app, std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace delaylens
