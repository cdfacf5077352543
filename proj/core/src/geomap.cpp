#include "actmap/geomap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "actmap/common.hpp"
#include "actmap/fsio.hpp"

namespace actmap {

namespace chr = std::chrono;

void validate(const GeoBBox& b) {
  require(std::isfinite(b.lat_min) && std::isfinite(b.lat_max) &&
              std::isfinite(b.lon_min) && std::isfinite(b.lon_max),
          "bbox coordinates must be finite");
  require(b.lat_min >= -90.0 && b.lat_max <= 90.0 && b.lon_min >= -180.0 &&
              b.lon_max <= 180.0,
          "bbox exceeds valid lat/lon ranges");
  require(b.lat_min < b.lat_max && b.lon_min < b.lon_max,
          "bbox is degenerate: min edges must be strictly below max edges");
}

IngestResult ingest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  IngestResult out;
  std::string line;
  size_t lineno = 0;
  size_t attempted = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ++attempted;
    try {
      out.records.push_back(detection_from_json(line));
    } catch (const std::exception& e) {
      ++out.malformed;
      if (out.first_errors.size() < 8)
        out.first_errors.push_back("line " + std::to_string(lineno) + ": " +
                                   e.what());
    }
  }
  if (out.malformed * 10 > attempted) {
    std::string msg = path.string() + ": " + std::to_string(out.malformed) +
                      " of " + std::to_string(attempted) +
                      " lines malformed (>10%)";
    for (const std::string& e : out.first_errors) msg += "\n  " + e;
    io_fail(msg);
  }
  return out;
}

std::optional<int> assign_class(const DetectionRecord& r, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0,
          "threshold must be in [0,1], got " + std::to_string(threshold));
  int best = 0;
  for (int c = 1; c < int(r.scores.size()); ++c)
    if (r.scores[c] > r.scores[best]) best = c;
  if (r.scores[best] >= threshold) return best;
  return std::nullopt;
}

size_t count_unassigned(const std::vector<DetectionRecord>& records,
                        double threshold) {
  size_t n = 0;
  for (const DetectionRecord& r : records)
    if (!assign_class(r, threshold)) ++n;
  return n;
}

long long ActivityGrid::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

namespace {

int grid_extent(double lo, double hi, double cell) {
  // A hair of slack so spans that are an exact multiple of the cell size
  // don't gain a phantom row to floating-point noise.
  return std::max(1, int(std::ceil((hi - lo) / cell - 1e-9)));
}

int cell_index(double x, double lo, double cell, int n) {
  const int i = int(std::floor((x - lo) / cell));
  return std::clamp(i, 0, n - 1);
}

ActivityGrid make_grid(const GeoBBox& bbox, double cell_size, int class_id) {
  validate(bbox);
  require(std::isfinite(cell_size) && cell_size > 0.0,
          "cell_size must be positive");
  ActivityGrid g;
  g.bbox = bbox;
  g.cell_size = cell_size;
  g.rows = grid_extent(bbox.lat_min, bbox.lat_max, cell_size);
  g.cols = grid_extent(bbox.lon_min, bbox.lon_max, cell_size);
  g.class_id = class_id;
  g.counts.assign(size_t(g.rows) * g.cols, 0);
  return g;
}

void grid_add(ActivityGrid& g, const DetectionRecord& r) {
  if (!g.bbox.contains(r.lat, r.lon)) {
    ++g.outside_bbox;
    return;
  }
  const int row = cell_index(r.lat, g.bbox.lat_min, g.cell_size, g.rows);
  const int col = cell_index(r.lon, g.bbox.lon_min, g.cell_size, g.cols);
  ++g.counts[size_t(row) * g.cols + col];
}

}  // namespace

ActivityGrid spatial_grid(const std::vector<DetectionRecord>& records,
                          int class_id, const GeoBBox& bbox, double cell_size,
                          double threshold) {
  ActivityGrid g = make_grid(bbox, cell_size, class_id);
  for (const DetectionRecord& r : records)
    if (assign_class(r, threshold) == class_id) grid_add(g, r);
  return g;
}

std::chrono::sys_days DailySeries::day(int index) const {
  return chr::sys_days{chr::year{year} / chr::January / 1} +
         chr::days{index};
}

namespace {

int days_in_year(int year) {
  const auto jan1 = chr::sys_days{chr::year{year} / chr::January / 1};
  const auto next = chr::sys_days{chr::year{year + 1} / chr::January / 1};
  return int((next - jan1).count());
}

}  // namespace

DailySeries daily_series(const std::vector<DetectionRecord>& records,
                         int class_id, int year, double threshold) {
  require(chr::year{year}.ok(), "invalid year " + std::to_string(year));
  DailySeries s;
  s.year = year;
  s.counts.assign(days_in_year(year), 0.0);
  const auto jan1 = chr::sys_days{chr::year{year} / chr::January / 1};
  for (const DetectionRecord& r : records) {
    if (assign_class(r, threshold) != class_id) continue;
    const auto day = chr::floor<chr::days>(r.ts);
    const auto idx = (day - jan1).count();
    if (idx >= 0 && idx < long(s.counts.size())) s.counts[size_t(idx)] += 1.0;
  }
  return s;
}

namespace {

double median_of(std::vector<double> v) {
  const size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<std::chrono::sys_days> detect_peaks(const DailySeries& s,
                                                int window, double k) {
  require(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
  require(std::isfinite(k) && k >= 0.0, "k must be nonnegative");
  const int n = int(s.counts.size());
  const int half = window / 2;
  std::vector<std::chrono::sys_days> peaks;
  std::vector<double> win, dev;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    win.assign(s.counts.begin() + lo, s.counts.begin() + hi + 1);
    const double med = median_of(win);
    dev.clear();
    for (double v : win) dev.push_back(std::abs(v - med));
    const double mad = median_of(dev);
    const double top = *std::max_element(win.begin(), win.end());
    if (s.counts[size_t(i)] > med + k * mad && s.counts[size_t(i)] == top)
      peaks.push_back(s.day(i));
  }
  return peaks;
}

std::vector<double> minmax_normalize(const std::vector<double>& xs) {
  require(!xs.empty(), "series must not be empty");
  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(xs.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - lo) / (hi - lo);
  return out;
}

std::array<long long, 12> monthly_counts(
    const std::vector<DetectionRecord>& records, int class_id, int year,
    double threshold) {
  require(chr::year{year}.ok(), "invalid year " + std::to_string(year));
  std::array<long long, 12> out{};
  for (const DetectionRecord& r : records) {
    if (assign_class(r, threshold) != class_id) continue;
    const chr::year_month_day ymd{chr::floor<chr::days>(r.ts)};
    if (int(ymd.year()) != year) continue;
    out[unsigned(ymd.month()) - 1] += 1;
  }
  return out;
}

namespace {

std::optional<double> pearson(const double* a, const double* b, size_t n) {
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::optional<double> correlate(const std::vector<double>& a,
                                const std::vector<double>& b) {
  require(a.size() == b.size(),
          "series lengths differ: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  require(a.size() >= 3, "need at least 3 points, got " +
                             std::to_string(a.size()));
  return pearson(a.data(), b.data(), a.size());
}

namespace {

nlohmann::json cell_feature(const ActivityGrid& g, int row, int col,
                            long long count, const std::string& class_name,
                            const std::optional<std::string>& date) {
  const double lat0 = g.bbox.lat_min + row * g.cell_size;
  const double lon0 = g.bbox.lon_min + col * g.cell_size;
  const double lat1 = lat0 + g.cell_size;
  const double lon1 = lon0 + g.cell_size;
  nlohmann::json f;
  f["type"] = "Feature";
  f["geometry"]["type"] = "Polygon";
  f["geometry"]["coordinates"] = {{{lon0, lat0},
                                   {lon1, lat0},
                                   {lon1, lat1},
                                   {lon0, lat1},
                                   {lon0, lat0}}};
  f["properties"]["count"] = count;
  f["properties"]["class"] = class_name;
  if (date)
    f["properties"]["date"] = *date;
  else
    f["properties"]["date"] = nullptr;
  return f;
}

std::string feature_collection(std::vector<nlohmann::json> features) {
  nlohmann::json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = std::move(features);
  return fc.dump();
}

}  // namespace

std::string grid_to_geojson(const ActivityGrid& grid,
                            const std::string& class_name,
                            const std::optional<std::string>& date) {
  std::vector<nlohmann::json> features;
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c)
      if (grid.at(r, c) > 0)
        features.push_back(cell_feature(grid, r, c, grid.at(r, c), class_name,
                                        date));
  return feature_collection(std::move(features));
}

RouteMap route_map(const std::vector<DetectionRecord>& records, int class_id,
                   const std::string& class_name, std::chrono::sys_days date,
                   const GeoBBox& bbox, double cell_size, double threshold) {
  ActivityGrid g = make_grid(bbox, cell_size, class_id);
  for (const DetectionRecord& r : records) {
    if (chr::floor<chr::days>(r.ts) != date) continue;
    if (assign_class(r, threshold) == class_id) grid_add(g, r);
  }

  RouteMap out;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (g.at(r, c) > 0)
        out.path.push_back(
            {r, c, g.at(r, c), g.cell_lat(r), g.cell_lon(c)});
  out.total = g.total();

  if (out.path.size() > 1) {
    // Principal axis of the centroid cloud via the 2x2 covariance matrix.
    double mlat = 0.0, mlon = 0.0;
    for (const RouteCell& c : out.path) {
      mlat += c.lat;
      mlon += c.lon;
    }
    mlat /= double(out.path.size());
    mlon /= double(out.path.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const RouteCell& c : out.path) {
      const double dx = c.lon - mlon, dy = c.lat - mlat;
      sxx += dx * dx;
      sxy += dx * dy;
      syy += dy * dy;
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double lam = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    double ax = sxy, ay = lam - sxx;
    if (ax == 0.0 && ay == 0.0) {
      ax = lam - syy;
      ay = sxy;
    }
    if (ax == 0.0 && ay == 0.0) ax = 1.0;
    if (ax < 0.0 || (ax == 0.0 && ay < 0.0)) {
      ax = -ax;
      ay = -ay;
    }
    std::stable_sort(out.path.begin(), out.path.end(),
                     [&](const RouteCell& a, const RouteCell& b) {
                       const double pa = ax * a.lon + ay * a.lat;
                       const double pb = ax * b.lon + ay * b.lat;
                       if (pa != pb) return pa < pb;
                       return std::pair(a.row, a.col) < std::pair(b.row, b.col);
                     });
  }

  std::vector<nlohmann::json> features;
  const std::string date_str = format_date(date);
  for (const RouteCell& c : out.path)
    features.push_back(cell_feature(g, c.row, c.col, c.count, class_name,
                                    date_str));
  out.geojson = feature_collection(std::move(features));
  return out;
}

namespace {

bool contains_ci(const std::string& hay, const std::string& needle) {
  if (needle.empty()) return true;
  const auto it = std::search(hay.begin(), hay.end(), needle.begin(),
                              needle.end(), [](char a, char b) {
                                return std::tolower(static_cast<unsigned char>(a)) ==
                                       std::tolower(static_cast<unsigned char>(b));
                              });
  return it != hay.end();
}

}  // namespace

TagReport tag_vs_content(const std::vector<DetectionRecord>& records,
                         const std::string& keyword, int class_id,
                         double threshold) {
  TagReport report;
  for (const DetectionRecord& r : records) {
    const bool tagged = r.tag && contains_ci(*r.tag, keyword);
    const auto content = assign_class(r, threshold);
    if (tagged && content != class_id)
      report.tag_false_positives.push_back({r.id, r.lat, r.lon});
    else if (!tagged && content == class_id)
      report.content_only.push_back({r.id, r.lat, r.lon});
  }
  return report;
}

std::optional<double> grid_correlation(const ActivityGrid& a,
                                       const ActivityGrid& b) {
  require(a.rows == b.rows && a.cols == b.cols &&
              a.cell_size == b.cell_size,
          "grids must share geometry to correlate");
  require(a.counts.size() >= 3, "grid too small to correlate");
  std::vector<double> xa(a.counts.begin(), a.counts.end());
  std::vector<double> xb(b.counts.begin(), b.counts.end());
  return pearson(xa.data(), xb.data(), xa.size());
}

}  // namespace actmap
