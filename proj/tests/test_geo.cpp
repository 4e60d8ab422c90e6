#include <doctest.h>

#include <cmath>
#include <random>

#include "delaylens/errors.hpp"
#include "delaylens/geo.hpp"

using namespace delaylens;

namespace {

DelayRecord ev(const std::string& id, const std::string& date, std::int64_t fatalities,
               const std::string& country = "Kenya", const std::string& sub = "Armed clash",
               double lat = 0.0, double lon = 0.0) {
    DelayRecord r;
    r.event_id = id;
    r.occurrence_date = Date::parse(date);
    r.first_seen_date = r.occurrence_date + 7;
    r.delay_weeks = 1;
    r.uncapped_weeks = 1;
    r.country = country;
    r.sub_event_type = sub;
    r.fatalities = fatalities;
    r.latitude = lat;
    r.longitude = lon;
    return r;
}

GeoReference tiny_georef() {
    GeoReference g;
    g.capitals = parse_capitals_csv("country,lat,lon\nKenya,0,0\nFarland,10,10\n");
    g.borders = BorderIndex::build({{{-1.0, 1.0}, {1.0, 1.0}}});
    g.country_table = parse_country_covariates_csv(
        "country,gdp_pc,population,govcensor,selfcensor,internet,regime\n"
        "Kenya,2000,5.5e7,0.3,-0.2,1,2\n"
        "Farland,900,1e6,-1.1,0.8,0,0\n");
    return g;
}

}  // namespace

TEST_CASE("great-circle distance closed forms") {
    const double one_deg = std::numbers::pi * 6371.0 / 180.0;
    CHECK(great_circle_km(0, 0, 0, 1) == doctest::Approx(one_deg).epsilon(1e-12));
    CHECK(great_circle_km(0, 0, 0, 1) == doctest::Approx(111.19492664).epsilon(1e-9));
    CHECK(great_circle_km(0, 0, 0, 180) == doctest::Approx(std::numbers::pi * 6371.0).epsilon(1e-12));
    CHECK(great_circle_km(0, 0, 0, 180) == doctest::Approx(20015.0868).epsilon(1e-7));
    CHECK(great_circle_km(12.5, -33.25, 12.5, -33.25) == 0.0);
    CHECK(great_circle_km(90, 0, -90, 0) == doctest::Approx(std::numbers::pi * 6371.0));
    CHECK_THROWS_AS(great_circle_km(91, 0, 0, 0), UsageError);
    CHECK_THROWS_AS(great_circle_km(0, 0, 0, 180.5), UsageError);
}

TEST_CASE("great-circle distance is symmetric and satisfies the triangle inequality") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> ulat(-90.0, 90.0);
    std::uniform_real_distribution<double> ulon(-180.0, 180.0);
    for (int i = 0; i < 200; ++i) {
        const double a1 = ulat(rng), o1 = ulon(rng);
        const double a2 = ulat(rng), o2 = ulon(rng);
        const double a3 = ulat(rng), o3 = ulon(rng);
        const double ab = great_circle_km(a1, o1, a2, o2);
        const double ba = great_circle_km(a2, o2, a1, o1);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
        const double bc = great_circle_km(a2, o2, a3, o3);
        const double ac = great_circle_km(a1, o1, a3, o3);
        CHECK(ac <= ab + bc + 1e-9);
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("distance to capital") {
    GeoReference g = tiny_georef();
    CHECK(dist_to_capital(0, 0, "Kenya", g) == 0.0);
    CHECK(dist_to_capital(0, 2, "Kenya", g) == doctest::Approx(222.38985).epsilon(1e-7));
    CHECK_THROWS_AS(dist_to_capital(0, 0, "Atlantis", g), DataError);
}

TEST_CASE("distance to border against the closed form") {
    GeoReference g = tiny_georef();
    // Border runs along longitude 1 between latitudes -1 and 1; by symmetry
    // the densified path crosses (0, 1). Vertex spacing bounds the error.
    CHECK(dist_to_border(0, 0, g) == doctest::Approx(111.1949).epsilon(5e-3));
    // A point sitting on an original vertex has distance zero.
    CHECK(dist_to_border(1.0, 1.0, g) == 0.0);

    GeoReference empty;
    CHECK_THROWS_AS(dist_to_border(0, 0, empty), DataError);
}

TEST_CASE("two border polylines: the nearer one wins") {
    BorderIndex idx = BorderIndex::build({{{0.0, 5.0}, {1.0, 5.0}}, {{0.0, -2.0}, {1.0, -2.0}}});
    const double d = idx.nearest_km(0.5, 0.0);
    // Brute force over every densified vertex is the oracle.
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& chunk : idx.chunks()) {
        for (const auto& [lat, lon] : chunk.points) {
            brute = std::min(brute, great_circle_km(0.5, 0.0, lat, lon));
        }
    }
    CHECK(d == brute);
    CHECK(d < great_circle_km(0.5, 0.0, 0.5, 5.0) + 1.0);  // the lon=-2 line is nearer
}

TEST_CASE("pruned nearest-border search equals brute force on random geometries") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> ulat(-60.0, 60.0);
    std::uniform_real_distribution<double> ulon(-170.0, 170.0);
    std::vector<std::vector<std::pair<double, double>>> lines;
    for (int l = 0; l < 6; ++l) {
        std::vector<std::pair<double, double>> line;
        double lat = ulat(rng), lon = ulon(rng);
        for (int v = 0; v < 5; ++v) {
            line.emplace_back(lat, lon);
            lat = std::clamp(lat + ulat(rng) / 30.0, -89.0, 89.0);
            lon = std::clamp(lon + ulon(rng) / 30.0, -179.0, 179.0);
        }
        lines.push_back(std::move(line));
    }
    BorderIndex idx = BorderIndex::build(lines, 5.0);
    for (int q = 0; q < 50; ++q) {
        const double lat = ulat(rng), lon = ulon(rng);
        double brute = std::numeric_limits<double>::infinity();
        for (const auto& chunk : idx.chunks()) {
            for (const auto& [plat, plon] : chunk.points) {
                brute = std::min(brute, great_circle_km(lat, lon, plat, plon));
            }
        }
        CHECK(idx.nearest_km(lat, lon) == brute);
    }
}

TEST_CASE("densification respects the spacing bound") {
    BorderIndex idx = BorderIndex::build({{{0.0, 0.0}, {0.0, 3.0}}}, 1.0);
    // 3 degrees along the equator is ~333.6 km; expect at least 334 segments.
    CHECK(idx.point_count() >= 335);
    const auto& pts = idx.chunks().front().points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(great_circle_km(pts[i - 1].first, pts[i - 1].second, pts[i].first,
                              pts[i].second) <= 1.0 + 1e-9);
    }
}

TEST_CASE("buffer population sums cells inside the radius, boundary inclusive") {
    // 3x3 grid at 0.1 degree spacing centered on the query point, values 1..9.
    std::string csv = "lon,lat,pop\n";
    int value = 1;
    for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
            csv += std::to_string(0.1 * j) + "," + std::to_string(0.1 * i) + "," +
                   std::to_string(value++) + "\n";
        }
    }
    PopulationRaster raster = parse_raster_csv(csv);
    const double got = buffer_population(0.0, 0.0, raster, 50.0);
    double expected = 0.0;
    for (const auto& c : raster.cells) {
        if (great_circle_km(0.0, 0.0, c.lat, c.lon) <= 50.0) expected += c.pop;
    }
    CHECK(got == expected);
    // 0.1 deg is ~11.1 km; corners are ~15.7 km out, so all nine cells fit.
    CHECK(got == 45.0);
    // Shrinking to 12 km keeps the plus-shape (center + 4 edge neighbours).
    CHECK(buffer_population(0.0, 0.0, raster, 12.0) == 2.0 + 4.0 + 5.0 + 6.0 + 8.0);
    // Radius zero still counts a cell sitting exactly on the query point.
    CHECK(buffer_population(0.0, 0.0, raster, 0.0) == 5.0);

    PopulationRaster zeros = parse_raster_csv("lon,lat,pop\n0,0,0\n1,1,0\n");
    CHECK(buffer_population(0.0, 0.0, zeros, 500.0) == 0.0);
}

TEST_CASE("buffer population is monotone in the radius") {
    std::mt19937 rng(5);
    std::string csv = "lon,lat,pop\n";
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 400; ++i) {
        csv += std::to_string(u(rng)) + "," + std::to_string(u(rng)) + "," +
               std::to_string(static_cast<int>(rng() % 100)) + "\n";
    }
    PopulationRaster raster = parse_raster_csv(csv);
    double prev = 0.0;
    for (double radius : {0.0, 10.0, 25.0, 60.0, 120.0, 300.0, 800.0}) {
        const double v = buffer_population(0.5, -0.5, raster, radius);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("cumulative fatalities window") {
    std::vector<DelayRecord> recs{
        ev("A", "2024-02-01", 2), ev("B", "2024-03-01", 0), ev("C", "2024-04-01", 5),
        ev("D", "2024-03-15", 100, "Kenya", "Other sub"),     // different sub-event
        ev("E", "2024-03-15", 100, "Farland", "Armed clash"),  // different country
        ev("F", "2023-12-31", 100),                            // before the since date
    };
    CHECK(cumulative_fatalities(recs, "Kenya", "Armed clash", Date::parse("2024-02-01")) == 2);
    CHECK(cumulative_fatalities(recs, "Kenya", "Armed clash", Date::parse("2024-04-01")) == 7);
    CHECK(cumulative_fatalities(recs, "Kenya", "Armed clash", Date::parse("2024-03-31")) == 2);
    CHECK(cumulative_fatalities(recs, "Kenya", "Armed clash", Date::parse("2023-12-31")) == 0);

    // Monotone in as_of.
    std::int64_t prev = 0;
    for (int d = 0; d < 120; d += 7) {
        const std::int64_t v =
            cumulative_fatalities(recs, "Kenya", "Armed clash", Date::parse("2024-01-01") + d);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("weekly fatalities aggregate per country ISO week") {
    // 2024-07-01 is a Monday; the 7th is the Sunday of the same ISO week.
    std::vector<DelayRecord> recs{
        ev("A", "2024-07-01", 3), ev("B", "2024-07-07", 4), ev("C", "2024-07-08", 50),
        ev("D", "2024-07-03", 10, "Farland"),
    };
    CHECK(weekly_fatalities(recs, recs[0]) == 7);
    CHECK(weekly_fatalities(recs, recs[1]) == 7);
    CHECK(weekly_fatalities(recs, recs[2]) == 50);  // adjacent week stays separate
    CHECK(weekly_fatalities(recs, recs[3]) == 10);
    CHECK(weekly_event_count(recs, recs[0]) == 2);
    CHECK(weekly_event_count(recs, recs[2]) == 1);

    std::vector<DelayRecord> lone{ev("L", "2024-07-01", 3)};
    CHECK(weekly_fatalities(lone, lone[0]) == 3);
}

TEST_CASE("assemble_covariates fills every field and applies winsorization") {
    GeoReference g = tiny_georef();
    PopulationRaster raster = parse_raster_csv("lon,lat,pop\n0,0,1000\n0.2,0.2,500\n10,10,77\n");

    std::vector<DelayRecord> recs;
    recs.push_back(ev("A", "2024-07-01", 0, "Kenya", "Armed clash", 0.0, 0.0));
    recs.push_back(ev("B", "2024-07-02", 5, "Kenya", "Armed clash", 0.0, 2.0));
    recs.push_back(ev("C", "2024-07-09", 2, "Farland", "Raid", 10.0, 10.0));
    recs.push_back(ev("X", "2024-07-01", 1, "Atlantis", "Raid", 5.0, 5.0));

    AssembleOptions opts;
    opts.winsor_rules.clear();  // exercise the raw values first
    AssembleResult res = assemble_covariates(recs, g, raster, opts);
    REQUIRE(res.records.size() == 3);
    REQUIRE(res.rejects.size() == 1);
    CHECK(res.rejects[0].event_id == "X");

    const CovariateVector& a = res.covariates[0];
    CHECK(a.logGDP == doctest::Approx(std::log(2000.0)));
    CHECK(a.logPOP == doctest::Approx(std::log1p(5.5e7)));
    CHECK(a.logDISTANCE == 0.0);  // event A sits on the capital
    CHECK(a.logPOP50km == doctest::Approx(std::log1p(1500.0)));  // both nearby cells
    CHECK(a.logFATALITY_wk == doctest::Approx(std::log1p(5.0)));  // A and B share the week
    CHECK(a.logEVENTS_wk == doctest::Approx(std::log1p(2.0)));
    CHECK(a.logFATALITY_cum == 0.0);  // own fatalities are zero, first in window
    CHECK(a.internet == 1);
    CHECK(a.regime == Regime::Democracy);
    CHECK(a.logBORDER == doctest::Approx(std::log1p(dist_to_border(0.0, 0.0, g))));

    const CovariateVector& b = res.covariates[1];
    CHECK(b.logFATALITY_cum == doctest::Approx(std::log1p(5.0)));  // A(0) + B(5)
    CHECK(b.logDISTANCE == doctest::Approx(std::log1p(222.38985)).epsilon(1e-7));

    const CovariateVector& c = res.covariates[2];
    CHECK(c.regime == Regime::ClosedAutocracy);
    CHECK(c.logPOP50km == doctest::Approx(std::log1p(77.0)));

    // With a 50% lower rule on logGDP the low-GDP country is pulled up.
    AssembleOptions wopts;
    wopts.winsor_rules = {{"logGDP", WinsorSide::Lower, 50.0}};
    AssembleResult wres = assemble_covariates(recs, g, raster, wopts);
    double mid = percentile_interpolated(
        {std::log(2000.0), std::log(2000.0), std::log(900.0)}, 50.0);
    CHECK(wres.covariates[2].logGDP == doctest::Approx(mid));
    CHECK(wres.covariates[0].logGDP == doctest::Approx(std::log(2000.0)));

    // Unknown variable in a rule is a usage error.
    AssembleOptions bad;
    bad.winsor_rules = {{"notAField", WinsorSide::Lower, 5.0}};
    CHECK_THROWS_AS(assemble_covariates(recs, g, raster, bad), UsageError);
}

TEST_CASE("assembled covariates are always finite") {
    GeoReference g = tiny_georef();
    PopulationRaster raster = parse_raster_csv("lon,lat,pop\n0,0,0\n");
    std::mt19937 rng(31);
    std::vector<DelayRecord> recs;
    for (int i = 0; i < 60; ++i) {
        recs.push_back(ev("R" + std::to_string(i),
                          (Date::parse("2024-06-01") + static_cast<int>(rng() % 90)).to_string(),
                          static_cast<std::int64_t>(rng() % 40), rng() % 2 ? "Kenya" : "Farland",
                          rng() % 2 ? "Armed clash" : "Raid", -30.0 + (i % 61),
                          -100.0 + 3.0 * (i % 60)));
    }
    AssembleResult res = assemble_covariates(recs, g, raster);
    REQUIRE(res.records.size() == recs.size());
    for (const auto& cv : res.covariates) {
        for (double v : {cv.logGDP, cv.logPOP, cv.logFATALITY_cum, cv.govcensor, cv.selfcensor,
                         cv.logBORDER, cv.logPOP50km, cv.logDISTANCE, cv.logFATALITY_wk,
                         cv.logEVENTS_wk}) {
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("reference table validation") {
    CHECK_THROWS_AS(parse_capitals_csv("country,lat,lon\nA,95,0\n"), UsageError);
    CHECK_THROWS_AS(parse_capitals_csv("country,lat,lon\nA,0,0\nA,1,1\n"), DataError);
    CHECK_THROWS_AS(parse_country_covariates_csv(
                        "country,gdp_pc,population,govcensor,selfcensor,internet,regime\n"
                        "A,0,1000,0,0,1,1\n"),
                    DataError);  // GDP must be positive
    CHECK_THROWS_AS(parse_country_covariates_csv(
                        "country,gdp_pc,population,govcensor,selfcensor,internet,regime\n"
                        "A,100,1000,0,0,2,1\n"),
                    DataError);  // internet not binary
    CHECK_THROWS_AS(parse_country_covariates_csv(
                        "country,gdp_pc,population,govcensor,selfcensor,internet,regime\n"
                        "A,100,1000,0,0,1,3\n"),
                    DataError);  // regime outside {0,1,2}
    CHECK_THROWS_AS(parse_raster_csv("lon,lat,pop\n0,0,-5\n"), DataError);
    CHECK_THROWS_AS(parse_raster_csv("lon,lat,pop\n0,0,5\n0.0,0,6\n"), DataError);
    CHECK_THROWS_AS(parse_borders_csv("polyline_id,seq,lat,lon\nL1,1,0,0\nL1,1,1,1\n"), DataError);

    // Border vertices ordered by seq, not file order.
    auto lines = parse_borders_csv("polyline_id,seq,lat,lon\nL1,2,0,2\nL1,1,0,1\nL1,3,0,3\n");
    REQUIRE(lines.size() == 1);
    CHECK(lines[0][0].second == 1.0);
    CHECK(lines[0][2].second == 3.0);
}
