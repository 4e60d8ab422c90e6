#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "delaylens/covariates.hpp"
#include "delaylens/delay_pipeline.hpp"

namespace delaylens {

inline constexpr double kEarthRadiusKm = 6371.0;

// Haversine distance on a sphere of radius 6371 km. Throws UsageError on
// out-of-bound coordinates.
double great_circle_km(double lat1, double lon1, double lat2, double lon2);

// Border polylines densified to <= max spacing and grouped into chunks with a
// bounding-cap (centroid + radius) for pruned nearest-vertex search.
class BorderIndex {
public:
    struct Chunk {
        double centroid_lat = 0.0;
        double centroid_lon = 0.0;
        double radius_km = 0.0;
        std::vector<std::pair<double, double>> points;  // lat, lon
    };

    static BorderIndex build(const std::vector<std::vector<std::pair<double, double>>>& polylines,
                             double max_spacing_km = 1.0);

    bool empty() const { return chunks_.empty(); }
    std::size_t point_count() const;
    const std::vector<Chunk>& chunks() const { return chunks_; }

    // Minimum great-circle distance to any densified vertex.
    double nearest_km(double lat, double lon) const;

private:
    std::vector<Chunk> chunks_;
};

struct CountryInfo {
    double gdp_pc = 0.0;      // strictly positive
    double population = 0.0;  // persons
    double govcensor = 0.0;
    double selfcensor = 0.0;
    int internet = 0;
    Regime regime = Regime::ClosedAutocracy;
};

struct GeoReference {
    std::map<std::string, std::pair<double, double>> capitals;  // country -> (lat, lon)
    std::map<std::string, CountryInfo> country_table;
    BorderIndex borders;
};

struct PopulationRaster {
    struct Cell {
        double lon = 0.0;
        double lat = 0.0;
        double pop = 0.0;
    };
    std::vector<Cell> cells;  // kept sorted by latitude for band queries
};

// Parsers for the reference CSVs. Each validates bounds and value domains.
std::map<std::string, std::pair<double, double>> parse_capitals_csv(std::string_view text);
std::vector<std::vector<std::pair<double, double>>> parse_borders_csv(std::string_view text);
std::map<std::string, CountryInfo> parse_country_covariates_csv(std::string_view text);
PopulationRaster parse_raster_csv(std::string_view text);

// Loads capitals.csv, borders.csv, country_covariates.csv from a directory.
GeoReference load_georef(const std::string& dir, double border_spacing_km = 1.0);
PopulationRaster load_raster(const std::string& path);

// Event-level geography. Unknown country -> DataError.
double dist_to_capital(double lat, double lon, const std::string& country,
                       const GeoReference& georef);
double dist_to_border(double lat, double lon, const GeoReference& georef);

// Sum of population over cells whose centroids lie within radius (inclusive).
double buffer_population(double lat, double lon, const PopulationRaster& raster,
                         double radius_km = 50.0);

// Fatalities of events matching (country, sub_event_type) with
// since <= event_date <= as_of; the as_of day's own events count.
std::int64_t cumulative_fatalities(const std::vector<DelayRecord>& records,
                                   const std::string& country, const std::string& sub_event_type,
                                   Date as_of, Date since = Date::from_ymd(2024, 1, 1));

// Fatalities (and event count) in the record's country during the ISO week of
// its occurrence, the record itself included.
std::int64_t weekly_fatalities(const std::vector<DelayRecord>& records, const DelayRecord& event);
std::int64_t weekly_event_count(const std::vector<DelayRecord>& records, const DelayRecord& event);

struct AssembleOptions {
    std::vector<WinsorRule> winsor_rules = default_winsor_rules();
    Date fatality_since = Date::from_ymd(2024, 1, 1);
    double buffer_radius_km = 50.0;
};

struct AssembleResult {
    std::vector<DelayRecord> records;          // accepted, input order preserved
    std::vector<CovariateVector> covariates;   // aligned with records
    std::vector<DelayReject> rejects;          // missing country references
};

// Computes every covariate on the modeling scale: log1p for counts and
// distances, log for GDP per capita, then the winsorization rules across the
// accepted records. Throws NumericError if any produced field is not finite.
AssembleResult assemble_covariates(const std::vector<DelayRecord>& records,
                                   const GeoReference& georef, const PopulationRaster& raster,
                                   const AssembleOptions& options = {});

}  // namespace delaylens
