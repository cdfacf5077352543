#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "actmap/georecords.hpp"

namespace actmap {

struct GeoBBox {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  // Half-open on the upper edges, matching the lower-inclusive cell rule.
  bool contains(double lat, double lon) const {
    return lat >= lat_min && lat < lat_max && lon >= lon_min && lon < lon_max;
  }
};

void validate(const GeoBBox& b);

inline constexpr double kDefaultCellSize = 0.002;  // degrees, ~200 m
inline constexpr double kDefaultScoreThreshold = 0.5;

struct IngestResult {
  std::vector<DetectionRecord> records;
  size_t malformed = 0;
  std::vector<std::string> first_errors;  // up to 8, tagged with line numbers
};

// Reads detection JSONL. Malformed lines are counted and reported in the
// result; more than 10% malformed lines is a hard error listing the first
// offenders.
IngestResult ingest(const std::filesystem::path& path);

// Argmax class if its score reaches the threshold, ties toward the lowest
// index; nullopt otherwise. threshold must be in [0,1].
std::optional<int> assign_class(const DetectionRecord& r, double threshold);

size_t count_unassigned(const std::vector<DetectionRecord>& records,
                        double threshold);

// Spatial histogram of one class's detections. Cell (row, col) covers
// [lat_min + row*cell, lat_min + (row+1)*cell) x [lon_min + col*cell, ...):
// every cell includes its lower edges.
struct ActivityGrid {
  GeoBBox bbox;
  double cell_size = kDefaultCellSize;
  int rows = 0;
  int cols = 0;
  int class_id = 0;
  std::vector<long long> counts;  // row-major, row 0 at lat_min
  long long outside_bbox = 0;     // assigned to the class but out of bounds

  long long at(int row, int col) const { return counts[size_t(row) * cols + col]; }
  long long total() const;
  double cell_lat(int row) const { return bbox.lat_min + (row + 0.5) * cell_size; }
  double cell_lon(int col) const { return bbox.lon_min + (col + 0.5) * cell_size; }
};

ActivityGrid spatial_grid(const std::vector<DetectionRecord>& records,
                          int class_id, const GeoBBox& bbox, double cell_size,
                          double threshold = kDefaultScoreThreshold);

// Counts per UTC calendar day for one year. Values are stored as reals so
// series can be rescaled or normalized without changing type.
struct DailySeries {
  int year = 0;
  std::vector<double> counts;  // index = day of year, size 365 or 366

  std::chrono::sys_days day(int index) const;
};

DailySeries daily_series(const std::vector<DetectionRecord>& records,
                         int class_id, int year,
                         double threshold = kDefaultScoreThreshold);

// A day is a peak iff its count strictly exceeds median + k*MAD of the
// surrounding window (clipped at the series ends) and equals the window
// maximum. Dates return ascending. window must be odd and >= 3.
std::vector<std::chrono::sys_days> detect_peaks(const DailySeries& s,
                                                int window = 15,
                                                double k = 6.0);

std::vector<double> minmax_normalize(const std::vector<double>& xs);

std::array<long long, 12> monthly_counts(
    const std::vector<DetectionRecord>& records, int class_id, int year,
    double threshold = kDefaultScoreThreshold);

// Pearson correlation; nullopt when either series is constant. Lengths must
// match and be >= 3.
std::optional<double> correlate(const std::vector<double>& a,
                                const std::vector<double>& b);

// GeoJSON FeatureCollection of the grid's nonzero cells as Polygon features
// with properties {"count": int, "class": str, "date": str|null}.
std::string grid_to_geojson(const ActivityGrid& grid,
                            const std::string& class_name,
                            const std::optional<std::string>& date);

struct RouteCell {
  int row = 0;
  int col = 0;
  long long count = 0;
  double lat = 0.0;  // cell centroid
  double lon = 0.0;
};

// Nonzero cells of one class on one date, ordered by projection of the cell
// centroids onto their principal axis, plus the same cells as GeoJSON.
struct RouteMap {
  std::vector<RouteCell> path;
  long long total = 0;
  std::string geojson;
};

RouteMap route_map(const std::vector<DetectionRecord>& records, int class_id,
                   const std::string& class_name, std::chrono::sys_days date,
                   const GeoBBox& bbox, double cell_size = kDefaultCellSize,
                   double threshold = kDefaultScoreThreshold);

struct TagMismatch {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
};

struct TagReport {
  // Tag contains the keyword but the content class differs (or is
  // unassigned).
  std::vector<TagMismatch> tag_false_positives;
  // Content class matches but the tag lacks the keyword (or is absent).
  std::vector<TagMismatch> content_only;
};

// Case-insensitive substring match of keyword against the tag.
TagReport tag_vs_content(const std::vector<DetectionRecord>& records,
                         const std::string& keyword, int class_id,
                         double threshold = kDefaultScoreThreshold);

// Pearson correlation between two grids of identical geometry over their
// cell counts; nullopt when either grid is constant.
std::optional<double> grid_correlation(const ActivityGrid& a,
                                       const ActivityGrid& b);

}  // namespace actmap
