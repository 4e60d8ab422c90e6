#include "delaylens/geo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "delaylens/csv.hpp"
#include "delaylens/errors.hpp"

namespace delaylens {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kKmPerDegLat = kEarthRadiusKm * kDegToRad;  // ~111.195

void check_bounds(double lat, double lon) {
    if (!(lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0)) {
        throw UsageError("coordinates out of bounds: lat " + format_double(lat) + ", lon " +
                         format_double(lon));
    }
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

Vec3 to_unit(double lat, double lon) {
    const double phi = lat * kDegToRad;
    const double lam = lon * kDegToRad;
    return {std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam), std::sin(phi)};
}

std::pair<double, double> to_lat_lon(const Vec3& v) {
    const double norm = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    const double lat = std::asin(std::clamp(v.z / norm, -1.0, 1.0)) / kDegToRad;
    const double lon = std::atan2(v.y, v.x) / kDegToRad;
    return {lat, lon};
}

double parse_double_or_throw(const std::string& s, const char* what, std::size_t row) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw DataError(std::string(what) + " row " + std::to_string(row) + ": '" + s +
                        "' is not a number");
    }
    return v;
}

long long parse_int_or_throw(const std::string& s, const char* what, std::size_t row) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError(std::string(what) + " row " + std::to_string(row) + ": '" + s +
                        "' is not an integer");
    }
    return v;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

}  // namespace

double great_circle_km(double lat1, double lon1, double lat2, double lon2) {
    check_bounds(lat1, lon1);
    check_bounds(lat2, lon2);
    const double phi1 = lat1 * kDegToRad;
    const double phi2 = lat2 * kDegToRad;
    const double dphi = (lat2 - lat1) * kDegToRad;
    const double dlam = (lon2 - lon1) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlam / 2.0);
    const double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::clamp(a, 0.0, 1.0)));
}

BorderIndex BorderIndex::build(
    const std::vector<std::vector<std::pair<double, double>>>& polylines, double max_spacing_km) {
    if (max_spacing_km <= 0.0) throw UsageError("border spacing must be positive");
    constexpr std::size_t kChunk = 256;

    std::vector<std::pair<double, double>> dense;
    for (const auto& line : polylines) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            check_bounds(line[i].first, line[i].second);
            if (i == 0) {
                dense.push_back(line[i]);
                continue;
            }
            const auto& a = line[i - 1];
            const auto& b = line[i];
            const double seg_km = great_circle_km(a.first, a.second, b.first, b.second);
            const int steps = std::max(1, static_cast<int>(std::ceil(seg_km / max_spacing_km)));
            const Vec3 va = to_unit(a.first, a.second);
            const Vec3 vb = to_unit(b.first, b.second);
            const double omega = seg_km / kEarthRadiusKm;
            const double sin_omega = std::sin(omega);
            for (int s = 1; s <= steps; ++s) {
                if (s == steps) {  // keep original vertices exact
                    dense.push_back(b);
                    break;
                }
                const double t = static_cast<double>(s) / steps;
                Vec3 v;
                if (sin_omega < 1e-12) {  // coincident or antipodal-degenerate: fall back
                    v = {va.x + t * (vb.x - va.x), va.y + t * (vb.y - va.y),
                         va.z + t * (vb.z - va.z)};
                } else {
                    const double wa = std::sin((1.0 - t) * omega) / sin_omega;
                    const double wb = std::sin(t * omega) / sin_omega;
                    v = {wa * va.x + wb * vb.x, wa * va.y + wb * vb.y, wa * va.z + wb * vb.z};
                }
                dense.push_back(to_lat_lon(v));
            }
        }
    }

    BorderIndex index;
    for (std::size_t start = 0; start < dense.size(); start += kChunk) {
        const std::size_t end = std::min(dense.size(), start + kChunk);
        Chunk chunk;
        chunk.points.assign(dense.begin() + static_cast<std::ptrdiff_t>(start),
                            dense.begin() + static_cast<std::ptrdiff_t>(end));
        Vec3 mean;
        for (const auto& [lat, lon] : chunk.points) {
            const Vec3 v = to_unit(lat, lon);
            mean.x += v.x;
            mean.y += v.y;
            mean.z += v.z;
        }
        const double norm = std::sqrt(mean.x * mean.x + mean.y * mean.y + mean.z * mean.z);
        if (norm < 1e-12) {
            std::tie(chunk.centroid_lat, chunk.centroid_lon) = chunk.points.front();
        } else {
            std::tie(chunk.centroid_lat, chunk.centroid_lon) = to_lat_lon(mean);
        }
        for (const auto& [lat, lon] : chunk.points) {
            chunk.radius_km = std::max(
                chunk.radius_km, great_circle_km(chunk.centroid_lat, chunk.centroid_lon, lat, lon));
        }
        index.chunks_.push_back(std::move(chunk));
    }
    return index;
}

std::size_t BorderIndex::point_count() const {
    std::size_t n = 0;
    for (const auto& c : chunks_) n += c.points.size();
    return n;
}

double BorderIndex::nearest_km(double lat, double lon) const {
    if (chunks_.empty()) throw DataError("border reference is empty");
    check_bounds(lat, lon);

    // Lower bound per chunk by the triangle inequality; visit promising first.
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        const Chunk& c = chunks_[i];
        const double lb = great_circle_km(lat, lon, c.centroid_lat, c.centroid_lon) - c.radius_km;
        order.emplace_back(lb, i);
    }
    std::sort(order.begin(), order.end());

    double best = std::numeric_limits<double>::infinity();
    for (const auto& [lb, i] : order) {
        if (lb >= best) break;
        for (const auto& [plat, plon] : chunks_[i].points) {
            best = std::min(best, great_circle_km(lat, lon, plat, plon));
        }
    }
    return best;
}

std::map<std::string, std::pair<double, double>> parse_capitals_csv(std::string_view text) {
    CsvTable t = parse_csv(text, ',');
    const auto c_country = static_cast<std::size_t>(t.require_column("country"));
    const auto c_lat = static_cast<std::size_t>(t.require_column("lat"));
    const auto c_lon = static_cast<std::size_t>(t.require_column("lon"));
    std::map<std::string, std::pair<double, double>> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const double lat = parse_double_or_throw(row[c_lat], "capitals", i + 1);
        const double lon = parse_double_or_throw(row[c_lon], "capitals", i + 1);
        check_bounds(lat, lon);
        if (!out.emplace(row[c_country], std::make_pair(lat, lon)).second) {
            throw DataError("capitals: duplicate country '" + row[c_country] + "'");
        }
    }
    return out;
}

std::vector<std::vector<std::pair<double, double>>> parse_borders_csv(std::string_view text) {
    CsvTable t = parse_csv(text, ',');
    const auto c_id = static_cast<std::size_t>(t.require_column("polyline_id"));
    const auto c_seq = static_cast<std::size_t>(t.require_column("seq"));
    const auto c_lat = static_cast<std::size_t>(t.require_column("lat"));
    const auto c_lon = static_cast<std::size_t>(t.require_column("lon"));

    std::map<std::string, std::map<long long, std::pair<double, double>>> lines;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const long long seq = parse_int_or_throw(row[c_seq], "borders", i + 1);
        const double lat = parse_double_or_throw(row[c_lat], "borders", i + 1);
        const double lon = parse_double_or_throw(row[c_lon], "borders", i + 1);
        check_bounds(lat, lon);
        if (!lines[row[c_id]].emplace(seq, std::make_pair(lat, lon)).second) {
            throw DataError("borders: duplicate vertex " + row[c_id] + "/" + row[c_seq]);
        }
    }
    std::vector<std::vector<std::pair<double, double>>> out;
    out.reserve(lines.size());
    for (const auto& [id, verts] : lines) {
        std::vector<std::pair<double, double>> line;
        line.reserve(verts.size());
        for (const auto& [seq, pt] : verts) line.push_back(pt);
        out.push_back(std::move(line));
    }
    return out;
}

std::map<std::string, CountryInfo> parse_country_covariates_csv(std::string_view text) {
    CsvTable t = parse_csv(text, ',');
    const auto c_country = static_cast<std::size_t>(t.require_column("country"));
    const auto c_gdp = static_cast<std::size_t>(t.require_column("gdp_pc"));
    const auto c_pop = static_cast<std::size_t>(t.require_column("population"));
    const auto c_gov = static_cast<std::size_t>(t.require_column("govcensor"));
    const auto c_self = static_cast<std::size_t>(t.require_column("selfcensor"));
    const auto c_net = static_cast<std::size_t>(t.require_column("internet"));
    const auto c_reg = static_cast<std::size_t>(t.require_column("regime"));

    std::map<std::string, CountryInfo> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        CountryInfo info;
        info.gdp_pc = parse_double_or_throw(row[c_gdp], "country_covariates", i + 1);
        if (!(info.gdp_pc > 0.0)) {
            throw DataError("country_covariates row " + std::to_string(i + 1) +
                            ": GDP per capita must be positive");
        }
        info.population = parse_double_or_throw(row[c_pop], "country_covariates", i + 1);
        if (info.population < 0.0) {
            throw DataError("country_covariates row " + std::to_string(i + 1) +
                            ": population must be nonnegative");
        }
        info.govcensor = parse_double_or_throw(row[c_gov], "country_covariates", i + 1);
        info.selfcensor = parse_double_or_throw(row[c_self], "country_covariates", i + 1);
        const long long net = parse_int_or_throw(row[c_net], "country_covariates", i + 1);
        if (net != 0 && net != 1) {
            throw DataError("country_covariates row " + std::to_string(i + 1) +
                            ": internet must be 0 or 1");
        }
        info.internet = static_cast<int>(net);
        const long long reg = parse_int_or_throw(row[c_reg], "country_covariates", i + 1);
        auto regime = regime_from_code(static_cast<int>(reg));
        if (!regime) {
            throw DataError("country_covariates row " + std::to_string(i + 1) +
                            ": regime must be 0, 1 or 2");
        }
        info.regime = *regime;
        if (!out.emplace(row[c_country], info).second) {
            throw DataError("country_covariates: duplicate country '" + row[c_country] + "'");
        }
    }
    return out;
}

PopulationRaster parse_raster_csv(std::string_view text) {
    CsvTable t = parse_csv(text, ',');
    const auto c_lon = static_cast<std::size_t>(t.require_column("lon"));
    const auto c_lat = static_cast<std::size_t>(t.require_column("lat"));
    const auto c_pop = static_cast<std::size_t>(t.require_column("pop"));

    PopulationRaster raster;
    raster.cells.reserve(t.rows.size());
    std::set<std::pair<double, double>> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        PopulationRaster::Cell cell;
        cell.lon = parse_double_or_throw(row[c_lon], "raster", i + 1);
        cell.lat = parse_double_or_throw(row[c_lat], "raster", i + 1);
        check_bounds(cell.lat, cell.lon);
        cell.pop = parse_double_or_throw(row[c_pop], "raster", i + 1);
        if (cell.pop < 0.0) {
            throw DataError("raster row " + std::to_string(i + 1) + ": negative population");
        }
        if (!seen.insert({cell.lon, cell.lat}).second) {
            throw DataError("raster row " + std::to_string(i + 1) + ": duplicate centroid");
        }
        raster.cells.push_back(cell);
    }
    std::sort(raster.cells.begin(), raster.cells.end(),
              [](const auto& a, const auto& b) { return a.lat < b.lat; });
    return raster;
}

GeoReference load_georef(const std::string& dir, double border_spacing_km) {
    GeoReference g;
    g.capitals = parse_capitals_csv(read_text_file(dir + "/capitals.csv"));
    g.borders = BorderIndex::build(parse_borders_csv(read_text_file(dir + "/borders.csv")),
                                   border_spacing_km);
    g.country_table =
        parse_country_covariates_csv(read_text_file(dir + "/country_covariates.csv"));
    return g;
}

PopulationRaster load_raster(const std::string& path) {
    return parse_raster_csv(read_text_file(path));
}

double dist_to_capital(double lat, double lon, const std::string& country,
                       const GeoReference& georef) {
    auto it = georef.capitals.find(country);
    if (it == georef.capitals.end()) {
        throw DataError("no capital reference for country '" + country + "'");
    }
    return great_circle_km(lat, lon, it->second.first, it->second.second);
}

double dist_to_border(double lat, double lon, const GeoReference& georef) {
    return georef.borders.nearest_km(lat, lon);
}

double buffer_population(double lat, double lon, const PopulationRaster& raster,
                         double radius_km) {
    check_bounds(lat, lon);
    if (radius_km < 0.0) throw UsageError("buffer radius must be nonnegative");
    // Latitude band prefilter: distance >= meridional separation, so anything
    // outside the band is strictly farther than the radius.
    const double band_deg = radius_km / kKmPerDegLat + 1e-9;
    const auto lo = std::lower_bound(
        raster.cells.begin(), raster.cells.end(), lat - band_deg,
        [](const PopulationRaster::Cell& c, double v) { return c.lat < v; });
    const auto hi = std::upper_bound(
        raster.cells.begin(), raster.cells.end(), lat + band_deg,
        [](double v, const PopulationRaster::Cell& c) { return v < c.lat; });
    double total = 0.0;
    for (auto it = lo; it != hi; ++it) {
        if (great_circle_km(lat, lon, it->lat, it->lon) <= radius_km) total += it->pop;
    }
    return total;
}

std::int64_t cumulative_fatalities(const std::vector<DelayRecord>& records,
                                   const std::string& country, const std::string& sub_event_type,
                                   Date as_of, Date since) {
    std::int64_t total = 0;
    for (const auto& r : records) {
        if (r.country != country || r.sub_event_type != sub_event_type) continue;
        if (r.occurrence_date < since || as_of < r.occurrence_date) continue;
        total += r.fatalities;
    }
    return total;
}

std::int64_t weekly_fatalities(const std::vector<DelayRecord>& records, const DelayRecord& event) {
    const IsoWeek week = iso_week(event.occurrence_date);
    std::int64_t total = 0;
    for (const auto& r : records) {
        if (r.country != event.country) continue;
        const IsoWeek w = iso_week(r.occurrence_date);
        if (w.year == week.year && w.week == week.week) total += r.fatalities;
    }
    return total;
}

std::int64_t weekly_event_count(const std::vector<DelayRecord>& records,
                                const DelayRecord& event) {
    const IsoWeek week = iso_week(event.occurrence_date);
    std::int64_t total = 0;
    for (const auto& r : records) {
        if (r.country != event.country) continue;
        const IsoWeek w = iso_week(r.occurrence_date);
        if (w.year == week.year && w.week == week.week) ++total;
    }
    return total;
}

AssembleResult assemble_covariates(const std::vector<DelayRecord>& records,
                                   const GeoReference& georef, const PopulationRaster& raster,
                                   const AssembleOptions& options) {
    // Prefix sums per (country, sub_event_type) make the cumulative lookups
    // O(log n) each; the brute-force definitions above serve as oracles.
    struct Series {
        std::vector<Date> dates;
        std::vector<std::int64_t> prefix;  // prefix[i] = sum of first i fatalities
    };
    std::map<std::pair<std::string, std::string>, Series> cumulative;
    {
        std::map<std::pair<std::string, std::string>, std::vector<std::pair<Date, std::int64_t>>>
            grouped;
        for (const auto& r : records) {
            grouped[{r.country, r.sub_event_type}].emplace_back(r.occurrence_date, r.fatalities);
        }
        for (auto& [key, items] : grouped) {
            std::sort(items.begin(), items.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            Series s;
            s.dates.reserve(items.size());
            s.prefix.reserve(items.size() + 1);
            s.prefix.push_back(0);
            for (const auto& [d, f] : items) {
                s.dates.push_back(d);
                s.prefix.push_back(s.prefix.back() + f);
            }
            cumulative.emplace(key, std::move(s));
        }
    }
    auto cum_lookup = [&](const std::string& country, const std::string& sub, Date as_of) {
        auto it = cumulative.find({country, sub});
        if (it == cumulative.end()) return std::int64_t{0};
        const Series& s = it->second;
        const auto hi = std::upper_bound(s.dates.begin(), s.dates.end(), as_of) - s.dates.begin();
        const auto lo =
            std::lower_bound(s.dates.begin(), s.dates.end(), options.fatality_since) -
            s.dates.begin();
        if (hi <= lo) return std::int64_t{0};
        return s.prefix[static_cast<std::size_t>(hi)] - s.prefix[static_cast<std::size_t>(lo)];
    };

    std::map<std::tuple<std::string, int, int>, std::pair<std::int64_t, std::int64_t>> weekly;
    for (const auto& r : records) {
        const IsoWeek w = iso_week(r.occurrence_date);
        auto& cell = weekly[{r.country, w.year, w.week}];
        cell.first += r.fatalities;
        ++cell.second;
    }

    AssembleResult result;
    result.records.reserve(records.size());
    result.covariates.reserve(records.size());
    for (const auto& r : records) {
        auto cap = georef.capitals.find(r.country);
        if (cap == georef.capitals.end()) {
            result.rejects.push_back({r.event_id, "no capital reference for country '" +
                                                      r.country + "'"});
            continue;
        }
        auto info = georef.country_table.find(r.country);
        if (info == georef.country_table.end()) {
            result.rejects.push_back({r.event_id, "no country covariates for '" + r.country +
                                                      "'"});
            continue;
        }
        const double dist_cap =
            great_circle_km(r.latitude, r.longitude, cap->second.first, cap->second.second);
        const double dist_border = georef.borders.nearest_km(r.latitude, r.longitude);
        const double pop50 =
            buffer_population(r.latitude, r.longitude, raster, options.buffer_radius_km);
        const IsoWeek w = iso_week(r.occurrence_date);
        const auto& wk = weekly.at({r.country, w.year, w.week});

        CovariateVector cv;
        cv.logGDP = std::log(info->second.gdp_pc);
        cv.logPOP = std::log1p(info->second.population);
        cv.logFATALITY_cum = std::log1p(
            static_cast<double>(cum_lookup(r.country, r.sub_event_type, r.occurrence_date)));
        cv.govcensor = info->second.govcensor;
        cv.selfcensor = info->second.selfcensor;
        cv.internet = info->second.internet;
        cv.regime = info->second.regime;
        cv.logBORDER = std::log1p(dist_border);
        cv.logPOP50km = std::log1p(pop50);
        cv.logDISTANCE = std::log1p(dist_cap);
        cv.logFATALITY_wk = std::log1p(static_cast<double>(wk.first));
        cv.logEVENTS_wk = std::log1p(static_cast<double>(wk.second));
        result.records.push_back(r);
        result.covariates.push_back(cv);
    }

    if (!result.covariates.empty()) {
        static const std::map<std::string, double CovariateVector::*> kFields = {
            {"logGDP", &CovariateVector::logGDP},
            {"logPOP", &CovariateVector::logPOP},
            {"logFATALITY_cum", &CovariateVector::logFATALITY_cum},
            {"govcensor", &CovariateVector::govcensor},
            {"selfcensor", &CovariateVector::selfcensor},
            {"logBORDER", &CovariateVector::logBORDER},
            {"logPOP50km", &CovariateVector::logPOP50km},
            {"logDISTANCE", &CovariateVector::logDISTANCE},
            {"logFATALITY_wk", &CovariateVector::logFATALITY_wk},
            {"logEVENTS_wk", &CovariateVector::logEVENTS_wk},
        };
        for (const WinsorRule& rule : options.winsor_rules) {
            auto field = kFields.find(rule.variable);
            if (field == kFields.end()) {
                throw UsageError("winsorization rule names unknown variable '" + rule.variable +
                                 "'");
            }
            std::vector<double> values;
            values.reserve(result.covariates.size());
            for (const auto& cv : result.covariates) values.push_back(cv.*(field->second));
            std::vector<double> clamped = winsorize(values, rule.side, rule.percentile);
            for (std::size_t i = 0; i < clamped.size(); ++i) {
                result.covariates[i].*(field->second) = clamped[i];
            }
        }
    }

    for (std::size_t i = 0; i < result.covariates.size(); ++i) {
        const CovariateVector& cv = result.covariates[i];
        for (double v : {cv.logGDP, cv.logPOP, cv.logFATALITY_cum, cv.govcensor, cv.selfcensor,
                         cv.logBORDER, cv.logPOP50km, cv.logDISTANCE, cv.logFATALITY_wk,
                         cv.logEVENTS_wk}) {
            if (!std::isfinite(v)) {
                throw NumericError("non-finite covariate for event " + result.records[i].event_id);
            }
        }
    }
    return result;
}

}  // namespace delaylens
