#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "actmap/common.hpp"
#include "actmap/fsio.hpp"
#include "actmap/geomap.hpp"

using namespace actmap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;

  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("actmap_geomap_" + std::to_string(getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

DetectionRecord make_record(const std::string& id, double lat, double lon,
                            const std::string& ts, int cls, int m,
                            double confidence = 0.9,
                            std::optional<std::string> tag = std::nullopt) {
  DetectionRecord r;
  r.id = id;
  r.lat = lat;
  r.lon = lon;
  r.ts = parse_rfc3339(ts);
  r.scores.assign(size_t(m), (1.0 - confidence) / (m - 1));
  r.scores[size_t(cls)] = confidence;
  r.tag = std::move(tag);
  return r;
}

const GeoBBox kBox{37.70, 37.82, -122.52, -122.35};

}  // namespace

TEST_CASE("ingest reads clean files, counts bad lines, fails past 10%") {
  TempDir tmp;

  atomic_write_file(tmp.path / "empty.jsonl", "");
  IngestResult empty = ingest(tmp.path / "empty.jsonl");
  CHECK(empty.records.empty());
  CHECK(empty.malformed == 0);

  const DetectionRecord good =
      make_record("a", 37.75, -122.42, "2016-06-25T10:00:00Z", 1, 3, 0.8,
                  "pickup game");
  atomic_write_file(tmp.path / "one.jsonl", detection_to_json(good) + "\n");
  IngestResult one = ingest(tmp.path / "one.jsonl");
  REQUIRE(one.records.size() == 1);
  CHECK(one.records[0].id == "a");
  CHECK(one.records[0].lat == 37.75);
  CHECK(one.records[0].scores == good.scores);
  CHECK(*one.records[0].tag == "pickup game");

  std::string mixed;
  for (int i = 0; i < 11; ++i)
    mixed += detection_to_json(make_record("r" + std::to_string(i), 37.75,
                                           -122.42, "2016-06-25T10:00:00Z", 0,
                                           3)) +
             "\n";
  DetectionRecord bad = good;
  bad.lat = 95.0;  // validation must flag the latitude
  nlohmann::json j = nlohmann::json::parse(detection_to_json(good));
  j["lat"] = 95.0;
  mixed += j.dump() + "\n";
  atomic_write_file(tmp.path / "mixed.jsonl", mixed);
  IngestResult partial = ingest(tmp.path / "mixed.jsonl");
  CHECK(partial.records.size() == 11);
  CHECK(partial.malformed == 1);
  REQUIRE(partial.first_errors.size() == 1);
  CHECK(partial.first_errors[0].find("line 12") != std::string::npos);
  CHECK(partial.first_errors[0].find("lat out of range") != std::string::npos);

  atomic_write_file(tmp.path / "rotten.jsonl",
                    detection_to_json(good) + "\n{broken\n{also broken\n");
  CHECK_THROWS_AS(ingest(tmp.path / "rotten.jsonl"), std::runtime_error);
}

TEST_CASE("class assignment thresholds the argmax and breaks ties low") {
  DetectionRecord r =
      make_record("x", 0, 0, "2016-01-01T00:00:00Z", 3, 10, 1.0);
  r.scores.assign(10, 0.0);
  r.scores[3] = 1.0;
  CHECK(assign_class(r, 0.5) == 3);

  r.scores.assign(10, 0.1);
  CHECK_FALSE(assign_class(r, 0.5).has_value());
  CHECK(assign_class(r, 0.0) == 0);

  r.scores = {0.4, 0.4, 0.2};
  CHECK(assign_class(r, 0.3) == 0);

  CHECK_THROWS_AS(assign_class(r, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(assign_class(r, -0.1), std::invalid_argument);
}

TEST_CASE("a single record fills exactly one grid cell") {
  const double lat = 0.5 * (kBox.lat_min + kBox.lat_max);
  const double lon = 0.5 * (kBox.lon_min + kBox.lon_max);
  std::vector<DetectionRecord> records{
      make_record("c", lat, lon, "2016-06-25T10:00:00Z", 0, 3)};
  ActivityGrid g = spatial_grid(records, 0, kBox, 0.002);
  CHECK(g.total() == 1);
  CHECK(g.outside_bbox == 0);
  long long nonzero = 0;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (g.at(r, c) != 0) {
        ++nonzero;
        CHECK(g.at(r, c) == 1);
      }
  CHECK(nonzero == 1);
}

TEST_CASE("cell edges are lower-inclusive") {
  GeoBBox box{0.0, 0.01, 0.0, 0.01};
  // Exactly on the boundary between rows 1 and 2: it belongs to the cell
  // whose lower edge it sits on.
  std::vector<DetectionRecord> records{
      make_record("e", 0.004, 0.001, "2016-01-01T00:00:00Z", 0, 2)};
  ActivityGrid g = spatial_grid(records, 0, box, 0.002);
  REQUIRE(g.rows == 5);
  REQUIRE(g.cols == 5);
  CHECK(g.at(2, 0) == 1);

  // The bbox origin is inside; the upper edges are not.
  std::vector<DetectionRecord> corners{
      make_record("lo", 0.0, 0.0, "2016-01-01T00:00:00Z", 0, 2),
      make_record("hi", 0.01, 0.005, "2016-01-01T00:00:00Z", 0, 2)};
  ActivityGrid g2 = spatial_grid(corners, 0, box, 0.002);
  CHECK(g2.at(0, 0) == 1);
  CHECK(g2.total() == 1);
  CHECK(g2.outside_bbox == 1);
}

TEST_CASE("grid counts are conserved over a class partition") {
  Rng rng(31);
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 1000; ++i) {
    const double lat = uniform(rng, kBox.lat_min - 0.02, kBox.lat_max + 0.02);
    const double lon = uniform(rng, kBox.lon_min - 0.02, kBox.lon_max + 0.02);
    const int cls = uniform_int(rng, 0, 2);
    // A fifth of the records are too uncertain to assign anywhere.
    const double conf = (i % 5 == 0) ? 0.34 : 0.9;
    records.push_back(make_record("r" + std::to_string(i), lat, lon,
                                  "2016-06-25T10:00:00Z", cls, 3, conf));
  }

  long long in_cells = 0, outside = 0;
  for (int cls = 0; cls < 3; ++cls) {
    ActivityGrid g = spatial_grid(records, cls, kBox, 0.002);
    in_cells += g.total();
    outside += g.outside_bbox;
  }
  const long long unassigned = long(count_unassigned(records, 0.5));
  CHECK(in_cells + outside + unassigned == 1000);

  // All-inside uniform records land entirely in cells.
  std::vector<DetectionRecord> inside;
  for (int i = 0; i < 1000; ++i)
    inside.push_back(make_record(
        "s" + std::to_string(i), uniform(rng, kBox.lat_min, kBox.lat_max - 1e-9),
        uniform(rng, kBox.lon_min, kBox.lon_max - 1e-9),
        "2016-06-25T10:00:00Z", 0, 3));
  CHECK(spatial_grid(inside, 0, kBox, 0.002).total() == 1000);
}

TEST_CASE("grids reject degenerate geometry") {
  std::vector<DetectionRecord> none;
  CHECK_THROWS_AS(spatial_grid(none, 0, GeoBBox{37.8, 37.7, -122.5, -122.4},
                               0.002),
                  std::invalid_argument);
  CHECK_THROWS_AS(spatial_grid(none, 0, kBox, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(spatial_grid(none, 0, GeoBBox{37.7, 37.7, -122.5, -122.4},
                               0.002),
                  std::invalid_argument);
}

TEST_CASE("daily series count per UTC day with calendar-aware length") {
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 500; ++i)
    records.push_back(make_record("d" + std::to_string(i), 37.75, -122.42,
                                  "2016-06-25T23:59:59Z", 1, 3));
  records.push_back(make_record("other_year", 37.75, -122.42,
                                "2015-06-25T10:00:00Z", 1, 3));
  records.push_back(make_record("other_class", 37.75, -122.42,
                                "2016-06-25T10:00:00Z", 0, 3));

  DailySeries s = daily_series(records, 1, 2016);
  REQUIRE(s.counts.size() == 366);
  CHECK(daily_series(records, 1, 2015).counts.size() == 365);

  double total = 0.0;
  int nonzero = -1;
  for (int i = 0; i < 366; ++i) {
    total += s.counts[size_t(i)];
    if (s.counts[size_t(i)] > 0) nonzero = i;
  }
  CHECK(total == 500.0);
  REQUIRE(nonzero >= 0);
  CHECK(s.counts[size_t(nonzero)] == 500.0);
  CHECK(format_date(s.day(nonzero)) == "2016-06-25");

  DailySeries empty = daily_series({}, 1, 2016);
  CHECK(*std::max_element(empty.counts.begin(), empty.counts.end()) == 0.0);
}

TEST_CASE("peak detection flags exactly the injected spikes") {
  DailySeries s;
  s.year = 2016;
  s.counts.assign(366, 0.0);

  SUBCASE("flat series has no peaks") {
    std::fill(s.counts.begin(), s.counts.end(), 7.0);
    CHECK(detect_peaks(s).empty());
  }

  SUBCASE("single spike on a zero floor") {
    s.counts[100] = 3.0;
    const auto peaks = detect_peaks(s);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0] == s.day(100));
  }

  SUBCASE("the five 2016 parade dates stand out of Poisson-ish noise") {
    Rng rng(5);
    for (double& c : s.counts) c = double(uniform_int(rng, 4, 12));
    const char* dates[5] = {"2016-02-20", "2016-03-12", "2016-05-28",
                            "2016-06-25", "2016-10-09"};
    const auto jan1 = parse_date("2016-01-01");
    for (const char* d : dates) {
      const int idx = int((parse_date(d) - jan1).count());
      s.counts[size_t(idx)] = 80.0 + s.counts[size_t(idx)];
    }
    const auto peaks = detect_peaks(s, 15, 6.0);
    REQUIRE(peaks.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(format_date(peaks[i]) == dates[i]);
    CHECK(std::is_sorted(peaks.begin(), peaks.end()));

    // Positive rescaling must not change the peak set.
    DailySeries scaled = s;
    for (double& c : scaled.counts) c *= 3.7;
    CHECK(detect_peaks(scaled, 15, 6.0) == peaks);
  }

  SUBCASE("spikes at the series edges use clipped windows") {
    s.counts[0] = 5.0;
    s.counts[365] = 9.0;
    const auto peaks = detect_peaks(s);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0] == s.day(0));
    CHECK(peaks[1] == s.day(365));
  }

  SUBCASE("window parameter is validated") {
    CHECK_THROWS_AS(detect_peaks(s, 4, 6.0), std::invalid_argument);
    CHECK_THROWS_AS(detect_peaks(s, 1, 6.0), std::invalid_argument);
    CHECK_THROWS_AS(detect_peaks(s, 15, -1.0), std::invalid_argument);
  }
}

TEST_CASE("peak detection agrees with a brute-force scan") {
  DailySeries s;
  s.year = 2015;
  Rng rng(9);
  s.counts.assign(365, 0.0);
  for (double& c : s.counts) c = double(uniform_int(rng, 0, 6));
  for (int k = 0; k < 8; ++k)
    s.counts[size_t(uniform_int(rng, 0, 364))] += double(uniform_int(rng, 30, 60));

  const int window = 11;
  const double k = 5.0;
  std::set<std::string> expected;
  for (int i = 0; i < 365; ++i) {
    const int lo = std::max(0, i - window / 2);
    const int hi = std::min(364, i + window / 2);
    std::vector<double> win(s.counts.begin() + lo, s.counts.begin() + hi + 1);
    std::vector<double> sorted = win;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    const double med =
        n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<double> dev;
    for (double v : win) dev.push_back(std::abs(v - med));
    std::sort(dev.begin(), dev.end());
    const double mad =
        n % 2 ? dev[n / 2] : 0.5 * (dev[n / 2 - 1] + dev[n / 2]);
    if (s.counts[size_t(i)] > med + k * mad &&
        s.counts[size_t(i)] == *std::max_element(win.begin(), win.end()))
      expected.insert(format_date(s.day(i)));
  }

  std::set<std::string> got;
  for (const auto day : detect_peaks(s, window, k)) got.insert(format_date(day));
  CHECK(got == expected);
}

TEST_CASE("min-max normalization and its degenerate cases") {
  CHECK(minmax_normalize({2, 4, 6}) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(minmax_normalize({7, 7, 7}) == std::vector<double>{0.5, 0.5, 0.5});

  Rng rng(13);
  std::vector<double> xs(40);
  for (double& x : xs) x = normal(rng, 3.0, 11.0);
  const auto norm = minmax_normalize(xs);
  for (double v : norm) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(minmax_normalize(norm) == norm);

  CHECK_THROWS_AS(minmax_normalize({}), std::invalid_argument);
}

TEST_CASE("monthly counts bucket by calendar month") {
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 17; ++i)
    records.push_back(make_record("j" + std::to_string(i), 37.75, -122.42,
                                  "2016-06-0" + std::to_string(1 + i % 9) +
                                      "T10:00:00Z",
                                  2, 3));
  const auto counts = monthly_counts(records, 2, 2016);
  for (int m = 0; m < 12; ++m) CHECK(counts[size_t(m)] == (m == 5 ? 17 : 0));
  long long total = 0;
  for (long long c : counts) total += c;
  CHECK(total == 17);

  const auto none = monthly_counts({}, 2, 2016);
  for (long long c : none) CHECK(c == 0);
}

TEST_CASE("correlation: identities, frozen oracle, affine response") {
  const std::vector<double> a{1, 2, 3};
  CHECK(*correlate(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> neg{-1, -2, -3};
  CHECK(*correlate(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));

  // By hand: centered a = [-1,0,1], centered b = [-7/3,-1/3,8/3],
  // cov = 5, var_a = 2, var_b = 38/3, r = 5 / sqrt(76/3).
  const std::vector<double> b{2, 4, 7};
  CHECK(*correlate(a, b) ==
        doctest::Approx(5.0 / std::sqrt(76.0 / 3.0)).epsilon(1e-14));
  CHECK(*correlate(a, b) == doctest::Approx(0.9933993).epsilon(1e-6));

  Rng rng(29);
  std::vector<double> x(24), y(24);
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = normal(rng);
    y[i] = normal(rng);
  }
  const double r = *correlate(x, y);
  std::vector<double> scaled(y);
  for (double& v : scaled) v = -2.5 * v + 7.0;
  CHECK(*correlate(x, scaled) == doctest::Approx(-r).epsilon(1e-12));

  CHECK_FALSE(correlate(a, {5, 5, 5}).has_value());
  CHECK_THROWS_AS(correlate(a, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(correlate({1, 2}, {1, 2}), std::invalid_argument);
}

TEST_CASE("grid GeoJSON carries polygons, counts, class, and date") {
  std::vector<DetectionRecord> records{
      make_record("a", 37.75, -122.42, "2016-06-25T10:00:00Z", 0, 3),
      make_record("b", 37.75, -122.42, "2016-06-25T11:00:00Z", 0, 3),
      make_record("c", 37.81, -122.36, "2016-06-25T12:00:00Z", 0, 3)};
  ActivityGrid g = spatial_grid(records, 0, kBox, 0.002);

  const auto fc = nlohmann::json::parse(
      grid_to_geojson(g, "basketball", std::nullopt));
  CHECK(fc.at("type") == "FeatureCollection");
  REQUIRE(fc.at("features").size() == 2);
  long long total = 0;
  for (const auto& f : fc.at("features")) {
    CHECK(f.at("type") == "Feature");
    CHECK(f.at("geometry").at("type") == "Polygon");
    const auto& ring = f.at("geometry").at("coordinates").at(0);
    REQUIRE(ring.size() == 5);
    CHECK(ring.front() == ring.back());
    for (const auto& pos : ring) {
      const double lon = pos.at(0).get<double>();
      const double lat = pos.at(1).get<double>();
      CHECK(lat >= kBox.lat_min);
      CHECK(lat <= kBox.lat_max + g.cell_size);
      CHECK(lon >= kBox.lon_min);
      CHECK(lon <= kBox.lon_max + g.cell_size);
    }
    CHECK(f.at("properties").at("class") == "basketball");
    CHECK(f.at("properties").at("date").is_null());
    total += f.at("properties").at("count").get<long long>();
  }
  CHECK(total == 3);
}

TEST_CASE("route maps order cells along the principal axis") {
  // A diagonal parade: records strung tightly along a line.
  Rng rng(41);
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 300; ++i) {
    const double t = uniform01(rng);
    const double lat = 37.72 + t * 0.08 + uniform(rng, -4e-4, 4e-4);
    const double lon = -122.50 + t * 0.12 + uniform(rng, -4e-4, 4e-4);
    records.push_back(make_record("p" + std::to_string(i), lat, lon,
                                  "2016-06-25T10:00:00Z", 1, 3));
  }
  records.push_back(make_record("off_day", 37.75, -122.45,
                                "2016-06-26T10:00:00Z", 1, 3));

  RouteMap rm = route_map(records, 1, "pride", parse_date("2016-06-25"), kBox);
  CHECK(rm.total == 300);
  REQUIRE(rm.path.size() > 10);

  // Projections onto the route direction must be monotone along the path.
  double prev = -1e300;
  for (const RouteCell& c : rm.path) {
    const double proj = 0.12 * c.lon + 0.08 * c.lat;
    CHECK(proj >= prev - 1e-9);
    prev = proj;
  }
  // Every nonzero cell hugs the synthetic route.
  for (const RouteCell& c : rm.path) {
    const double t = (c.lon + 122.50) / 0.12;
    const double expect_lat = 37.72 + std::clamp(t, 0.0, 1.0) * 0.08;
    CHECK(std::abs(c.lat - expect_lat) < 0.004);
  }

  const long long series_count =
      long(daily_series(records, 1, 2016)
               .counts[size_t((parse_date("2016-06-25") -
                               parse_date("2016-01-01")).count())]);
  CHECK(rm.total == series_count);

  const auto fc = nlohmann::json::parse(rm.geojson);
  REQUIRE(fc.at("features").size() == rm.path.size());
  long long gj_total = 0;
  for (const auto& f : fc.at("features")) {
    CHECK(f.at("properties").at("date") == "2016-06-25");
    gj_total += f.at("properties").at("count").get<long long>();
  }
  CHECK(gj_total == rm.total);
}

TEST_CASE("route map of an empty date is an empty feature collection") {
  std::vector<DetectionRecord> records{
      make_record("solo", 37.75, -122.45, "2016-06-25T10:00:00Z", 1, 3)};
  RouteMap rm =
      route_map(records, 1, "pride", parse_date("2016-07-04"), kBox);
  CHECK(rm.path.empty());
  CHECK(rm.total == 0);
  CHECK(nlohmann::json::parse(rm.geojson).at("features").empty());

  RouteMap solo =
      route_map(records, 1, "pride", parse_date("2016-06-25"), kBox);
  REQUIRE(solo.path.size() == 1);
  CHECK(solo.path[0].count == 1);
}

TEST_CASE("tag and content disagreements are split into the two lists") {
  std::vector<DetectionRecord> records{
      // Soccer content, football tag: the classic false positive.
      make_record("fp", 37.75, -122.42, "2016-06-25T10:00:00Z", 2, 3, 0.9,
                  "kids playing FOOTBALL"),
      // Football both ways: in neither list.
      make_record("ok", 37.76, -122.42, "2016-06-25T10:00:00Z", 1, 3, 0.9,
                  "football highlights"),
      // Football content without the keyword.
      make_record("content", 37.77, -122.42, "2016-06-25T10:00:00Z", 1, 3,
                  0.9, "great match"),
      // Football content with no tag at all.
      make_record("untagged", 37.78, -122.42, "2016-06-25T10:00:00Z", 1, 3),
      // Unrelated class and tag.
      make_record("other", 37.79, -122.42, "2016-06-25T10:00:00Z", 0, 3, 0.9,
                  "dunk contest")};

  TagReport report = tag_vs_content(records, "football", 1);
  REQUIRE(report.tag_false_positives.size() == 1);
  CHECK(report.tag_false_positives[0].id == "fp");
  CHECK(report.tag_false_positives[0].lat == 37.75);
  REQUIRE(report.content_only.size() == 2);
  CHECK(report.content_only[0].id == "content");
  CHECK(report.content_only[1].id == "untagged");
}

TEST_CASE("grid correlation compares aligned activity patterns") {
  GeoBBox box{0.0, 0.01, 0.0, 0.01};
  std::vector<DetectionRecord> east, west;
  Rng rng(51);
  for (int i = 0; i < 400; ++i) {
    const double lat = uniform(rng, 0.0, 0.0099);
    east.push_back(make_record("e" + std::to_string(i), lat,
                               uniform(rng, 0.005, 0.0099),
                               "2016-06-25T10:00:00Z", 0, 2));
    west.push_back(make_record("w" + std::to_string(i), lat,
                               uniform(rng, 0.0, 0.0049),
                               "2016-06-25T10:00:00Z", 0, 2));
  }
  ActivityGrid ge = spatial_grid(east, 0, box, 0.002);
  ActivityGrid gw = spatial_grid(west, 0, box, 0.002);

  CHECK(*grid_correlation(ge, ge) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*grid_correlation(ge, gw) < 0.0);

  ActivityGrid empty = spatial_grid({}, 0, box, 0.002);
  CHECK_FALSE(grid_correlation(ge, empty).has_value());

  ActivityGrid other = spatial_grid({}, 0, box, 0.005);
  CHECK_THROWS_AS(grid_correlation(ge, other), std::invalid_argument);
}
