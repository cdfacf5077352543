#include <algorithm>
#include <cmath>
#include <cstdio>

#include "actmap/common.hpp"
#include "actmap/synth.hpp"

namespace actmap {

namespace chr = std::chrono;

namespace {

int poisson(Rng& rng, double lambda) {
  int k = 0;
  // exp(-lambda) underflows for large rates; Poisson sums stay Poisson.
  while (lambda > 500.0) {
    k += poisson(rng, 500.0);
    lambda -= 500.0;
  }
  if (lambda <= 0.0) return k;
  const double limit = std::exp(-lambda);
  double p = 1.0;
  int draws = -1;
  do {
    ++draws;
    p *= uniform01(rng);
  } while (p > limit);
  return k + draws;
}

// Marsaglia-Tsang, valid for alpha >= 1.
double gamma_sample(Rng& rng, double alpha) {
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform01(rng);
    if (u == 0.0) continue;
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

std::vector<double> dirichlet_scores(Rng& rng, int m, int true_class,
                                     double concentration) {
  std::vector<double> g(static_cast<size_t>(m));
  double sum = 0.0;
  for (int c = 0; c < m; ++c) {
    g[size_t(c)] = gamma_sample(rng, c == true_class ? concentration : 1.0);
    sum += g[size_t(c)];
  }
  for (double& x : g) x /= sum;
  return g;
}

struct RoutePath {
  std::vector<std::pair<double, double>> points;
  std::vector<double> cumulative;  // arc length up to each point
  double total = 0.0;

  explicit RoutePath(const std::vector<std::pair<double, double>>& pts)
      : points(pts) {
    cumulative.push_back(0.0);
    for (size_t i = 1; i < points.size(); ++i) {
      total += std::hypot(points[i].first - points[i - 1].first,
                          points[i].second - points[i - 1].second);
      cumulative.push_back(total);
    }
  }

  std::pair<double, double> at(double s) const {
    if (total == 0.0) return points.front();
    s = std::clamp(s, 0.0, total);
    const auto it =
        std::upper_bound(cumulative.begin() + 1, cumulative.end(), s);
    const size_t seg = size_t(it - cumulative.begin());
    const double s0 = cumulative[seg - 1];
    const double len = cumulative[seg] - s0;
    const double t = len > 0.0 ? (s - s0) / len : 0.0;
    const auto& a = points[seg - 1];
    const auto& b = points[seg];
    return {a.first + t * (b.first - a.first),
            a.second + t * (b.second - a.second)};
  }
};

}  // namespace

void validate(const GeoScenarioSpec& spec) {
  require(chr::year{spec.year}.ok(), "invalid scenario year");
  validate(spec.bbox);
  const int m = int(spec.class_names.size());
  require(m > 0, "scenario needs at least one class");
  for (const std::string& name : spec.class_names)
    require(!name.empty(), "class names must not be empty");
  require(int(spec.base_rates.size()) == m,
          "base_rates must list one rate per class");
  for (double r : spec.base_rates)
    require(std::isfinite(r) && r >= 0.0, "base rates must be nonnegative");
  for (const std::vector<double>* coupling :
       {&spec.temp_coupling, &spec.precip_coupling}) {
    require(coupling->empty() || int(coupling->size()) == m,
            "coupling vectors must be empty or one value per class");
    for (double c : *coupling)
      require(std::isfinite(c) && c >= -1.0 && c <= 1.0,
              "couplings must lie in [-1,1]");
  }
  require(spec.tag_noise_rate >= 0.0 && spec.tag_noise_rate <= 1.0,
          "tag-noise rate must be in [0,1]");
  require(spec.score_concentration >= 1.0,
          "score concentration must be >= 1");
  require(std::isfinite(spec.route_jitter) && spec.route_jitter >= 0.0,
          "route jitter must be nonnegative");
  const auto jan1 = chr::sys_days{chr::year{spec.year} / chr::January / 1};
  const auto next = chr::sys_days{chr::year{spec.year + 1} / chr::January / 1};
  for (const GeoEvent& e : spec.events) {
    const auto day = parse_date(e.date);
    require(day >= jan1 && day < next,
            "event date " + e.date + " outside scenario year " +
                std::to_string(spec.year));
    require(e.count >= 0, "event count must be nonnegative");
    require(e.class_id >= 0 && e.class_id < m,
            "event class id out of range: " + std::to_string(e.class_id));
    require(!e.route.empty(), "event route must have at least one point");
    for (const auto& [lat, lon] : e.route)
      require(spec.bbox.contains(lat, lon),
              "event route leaves the scenario bbox");
  }
}

GeoDetections gen_geo_detections(const GeoScenarioSpec& spec,
                                 const WeatherSeries& weather) {
  validate(spec);
  validate(weather);
  const int m = int(spec.class_names.size());

  const auto norm_temp = minmax_normalize(
      {weather.temperature.begin(), weather.temperature.end()});
  const auto norm_precip = minmax_normalize(
      {weather.precipitation.begin(), weather.precipitation.end()});
  const auto month_factor = [&](int c, int month) {
    double f = 1.0;
    if (!spec.temp_coupling.empty())
      f *= std::max(
          0.0, 1.0 + spec.temp_coupling[size_t(c)] *
                         (2.0 * norm_temp[size_t(month)] - 1.0));
    if (!spec.precip_coupling.empty())
      f *= std::max(
          0.0, 1.0 + spec.precip_coupling[size_t(c)] *
                         (2.0 * norm_precip[size_t(month)] - 1.0));
    return f;
  };

  Rng rng(spec.seed);
  GeoDetections out;
  long long next_id = 0;

  const auto finish_record = [&](double lat, double lon,
                                 chr::sys_days day, int true_class) {
    DetectionRecord r;
    char id[24];
    std::snprintf(id, sizeof id, "det_%06lld", next_id++);
    r.id = id;
    r.lat = std::clamp(lat, -90.0, 90.0);
    r.lon = std::clamp(lon, -180.0, 180.0);
    r.ts = day + chr::seconds{uniform_int(rng, 0, 86399)};
    r.scores = dirichlet_scores(rng, m, true_class, spec.score_concentration);
    const std::string& name = spec.class_names[size_t(true_class)];
    r.tag = name;
    for (const auto& [from, to] : spec.tag_confusions)
      if (from == name) {
        if (uniform01(rng) < spec.tag_noise_rate) {
          r.tag = to;
          out.mistagged_ids.push_back(r.id);
        }
        break;
      }
    out.records.push_back(std::move(r));
  };

  const auto jan1 = chr::sys_days{chr::year{spec.year} / chr::January / 1};
  const auto next_year =
      chr::sys_days{chr::year{spec.year + 1} / chr::January / 1};
  for (auto day = jan1; day < next_year; day += chr::days{1}) {
    const chr::year_month_day ymd{day};
    const int month = int(unsigned(ymd.month())) - 1;
    for (int c = 0; c < m; ++c) {
      const double lambda = spec.base_rates[size_t(c)] * month_factor(c, month);
      const int n = poisson(rng, lambda);
      out.baseline_count += n;
      for (int i = 0; i < n; ++i) {
        const double lat =
            uniform(rng, spec.bbox.lat_min, spec.bbox.lat_max);
        const double lon =
            uniform(rng, spec.bbox.lon_min, spec.bbox.lon_max);
        finish_record(lat, lon, day, c);
      }
    }
  }

  for (const GeoEvent& e : spec.events) {
    const auto day = parse_date(e.date);
    const RoutePath path(e.route);
    out.injected_count += e.count;
    for (int i = 0; i < e.count; ++i) {
      auto [lat, lon] = path.at(uniform01(rng) * path.total);
      lat += uniform(rng, -spec.route_jitter, spec.route_jitter);
      lon += uniform(rng, -spec.route_jitter, spec.route_jitter);
      finish_record(lat, lon, day, e.class_id);
    }
  }
  return out;
}

}  // namespace actmap
