#include "actmap/georecords.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "actmap/common.hpp"
#include "actmap/fsio.hpp"

namespace actmap {

namespace chr = std::chrono;

UtcSeconds parse_rfc3339(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char zone = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi,
                  &sec, &zone) != 7 ||
      zone != 'Z' || s.size() != 20)
    fail("timestamp must be YYYY-MM-DDThh:mm:ssZ, got '" + s + "'");
  const chr::year_month_day ymd{chr::year{y}, chr::month{unsigned(mo)},
                                chr::day{unsigned(d)}};
  require(ymd.ok(), "no such calendar date: '" + s + "'");
  require(h >= 0 && h < 24 && mi >= 0 && mi < 60 && sec >= 0 && sec < 60,
          "time of day out of range: '" + s + "'");
  return chr::sys_days{ymd} + chr::hours{h} + chr::minutes{mi} +
         chr::seconds{sec};
}

std::string format_rfc3339(UtcSeconds t) {
  const auto day = chr::floor<chr::days>(t);
  const chr::year_month_day ymd{day};
  const chr::hh_mm_ss tod{t - day};
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ",
                int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                static_cast<long long>(tod.hours().count()),
                static_cast<long long>(tod.minutes().count()),
                static_cast<long long>(tod.seconds().count()));
  return buf;
}

chr::sys_days parse_date(const std::string& s) {
  int y = 0, mo = 0, d = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d", &y, &mo, &d) != 3 || s.size() != 10)
    fail("date must be YYYY-MM-DD, got '" + s + "'");
  const chr::year_month_day ymd{chr::year{y}, chr::month{unsigned(mo)},
                                chr::day{unsigned(d)}};
  require(ymd.ok(), "no such calendar date: '" + s + "'");
  return chr::sys_days{ymd};
}

std::string format_date(chr::sys_days d) {
  const chr::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

void validate(const DetectionRecord& r) {
  require(!r.id.empty(), "detection id must not be empty");
  require(std::isfinite(r.lat) && r.lat >= -90.0 && r.lat <= 90.0,
          "lat out of range [-90,90]: " + std::to_string(r.lat) + " (id " +
              r.id + ")");
  require(std::isfinite(r.lon) && r.lon >= -180.0 && r.lon <= 180.0,
          "lon out of range [-180,180]: " + std::to_string(r.lon) + " (id " +
              r.id + ")");
  require(!r.scores.empty(), "scores must not be empty (id " + r.id + ")");
  double sum = 0.0;
  for (double s : r.scores) {
    require(std::isfinite(s) && s >= 0.0,
            "scores must be nonnegative (id " + r.id + ")");
    sum += s;
  }
  require(std::abs(sum - 1.0) <= 1e-6,
          "scores must sum to 1 within 1e-6, got " + std::to_string(sum) +
              " (id " + r.id + ")");
}

std::string detection_to_json(const DetectionRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["lat"] = r.lat;
  j["lon"] = r.lon;
  j["ts"] = format_rfc3339(r.ts);
  j["scores"] = r.scores;
  if (r.tag)
    j["tag"] = *r.tag;
  else
    j["tag"] = nullptr;
  return j.dump();
}

DetectionRecord detection_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("not a JSON object: ") + e.what());
  }
  DetectionRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.lat = j.at("lat").get<double>();
    r.lon = j.at("lon").get<double>();
    r.ts = parse_rfc3339(j.at("ts").get<std::string>());
    r.scores = j.at("scores").get<std::vector<double>>();
    if (j.contains("tag") && !j["tag"].is_null())
      r.tag = j["tag"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("bad detection fields: ") + e.what());
  }
  validate(r);
  return r;
}

void write_detections(const std::filesystem::path& path,
                      const std::vector<DetectionRecord>& records) {
  std::ostringstream out;
  for (const DetectionRecord& r : records) {
    validate(r);
    out << detection_to_json(r) << '\n';
  }
  atomic_write_file(path, out.str());
}

void validate(const WeatherSeries& w) {
  for (int m = 0; m < 12; ++m) {
    require(std::isfinite(w.temperature[m]),
            "temperature for month " + std::to_string(m + 1) + " not finite");
    require(std::isfinite(w.precipitation[m]),
            "precipitation for month " + std::to_string(m + 1) + " not finite");
  }
}

void write_weather_csv(const std::filesystem::path& path,
                       const WeatherSeries& w) {
  validate(w);
  std::ostringstream out;
  out << "month,temperature,precipitation\n";
  out.precision(17);
  for (int m = 0; m < 12; ++m)
    out << (m + 1) << ',' << w.temperature[m] << ',' << w.precipitation[m]
        << '\n';
  atomic_write_file(path, out.str());
}

WeatherSeries read_weather_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  require(std::getline(in, line) &&
              (line == "month,temperature,precipitation" ||
               line == "month,temperature,precipitation\r"),
          "weather CSV must start with 'month,temperature,precipitation': " +
              path.string());
  WeatherSeries w;
  for (int m = 0; m < 12; ++m) {
    require(static_cast<bool>(std::getline(in, line)),
            "weather CSV needs 12 data rows: " + path.string());
    int month = 0;
    double temp = 0.0, precip = 0.0;
    require(std::sscanf(line.c_str(), "%d,%lf,%lf", &month, &temp, &precip) ==
                    3 &&
                month == m + 1,
            "bad weather CSV row '" + line + "' (expected month " +
                std::to_string(m + 1) + ")");
    w.temperature[m] = temp;
    w.precipitation[m] = precip;
  }
  while (std::getline(in, line))
    require(line.empty() || line == "\r",
            "weather CSV has more than 12 data rows: " + path.string());
  validate(w);
  return w;
}

}  // namespace actmap
