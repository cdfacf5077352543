#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace actmap {

using UtcSeconds = std::chrono::sys_seconds;

// "YYYY-MM-DDThh:mm:ssZ" <-> UTC instant; throws std::invalid_argument on
// malformed or out-of-range input.
UtcSeconds parse_rfc3339(const std::string& s);
std::string format_rfc3339(UtcSeconds t);

// "YYYY-MM-DD" <-> UTC calendar day.
std::chrono::sys_days parse_date(const std::string& s);
std::string format_date(std::chrono::sys_days d);

// One classified, geo-tagged video. Scores are a probability vector over
// the M activity classes (nonnegative, summing to 1 within 1e-6).
struct DetectionRecord {
  std::string id;
  double lat = 0.0;  // degrees in [-90, 90]
  double lon = 0.0;  // degrees in [-180, 180]
  UtcSeconds ts{};
  std::vector<double> scores;
  std::optional<std::string> tag;
};

// Throws std::invalid_argument with a field diagnostic.
void validate(const DetectionRecord& r);

// One JSON object per line:
//   {"id":str,"lat":f,"lon":f,"ts":"RFC3339","scores":[f x M],"tag":str|null}
std::string detection_to_json(const DetectionRecord& r);
DetectionRecord detection_from_json(const std::string& line);

void write_detections(const std::filesystem::path& path,
                      const std::vector<DetectionRecord>& records);

// Monthly weather for one year, January first.
struct WeatherSeries {
  std::array<double, 12> temperature{};    // degrees
  std::array<double, 12> precipitation{};  // depth units
};

void validate(const WeatherSeries& w);

// CSV with header "month,temperature,precipitation" and rows for months
// 1..12 in order.
void write_weather_csv(const std::filesystem::path& path,
                       const WeatherSeries& w);
WeatherSeries read_weather_csv(const std::filesystem::path& path);

}  // namespace actmap
