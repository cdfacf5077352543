#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "actmap/dataset.hpp"
#include "actmap/flow.hpp"
#include "actmap/geomap.hpp"
#include "actmap/georecords.hpp"

namespace actmap {

enum class TextureKind { noise, ramp, checker };

TextureKind texture_from_string(const std::string& s);
std::string to_string(TextureKind kind);

// Background pattern as a [1,3,H,W] tensor in [0,1]. `cell` sets the
// feature size in pixels (noise lattice spacing / checker period); the ramp
// ignores it.
Tensor make_texture(TextureKind kind, int height, int width, int cell,
                    Rng& rng);

// One bilinear translation step with border clamp: the scene content moves
// by (+vx, +vy) pixels.
Tensor shift_frame(const Tensor& frame, double vx, double vy);

struct SyntheticClipSpec {
  TextureKind texture = TextureKind::noise;
  double vx = 0.0;  // px/frame, positive = rightward
  double vy = 0.0;  // px/frame, positive = downward
  int frame_count = 3;
  int height = 64;
  int width = 64;
  uint64_t seed = 0;
};

void validate(const SyntheticClipSpec& spec);

struct GeneratedClip {
  FrameStack frames;      // [1, 3F, H, W]
  FlowField flow;         // [1, 2(F-1), H, W], the exact constant velocity
};

// Every frame is the previous one translated by the spec velocity; the
// returned flow maps each frame pair back onto the earlier frame.
GeneratedClip gen_clip(const SyntheticClipSpec& spec);

// Border pixels whose warp samples were clamped; comparisons against the
// analytic ground truth should skip this margin.
int interior_margin(double vx, double vy);

// Mean over all flow vectors of the Euclidean distance between prediction
// and truth, in pixels.
double endpoint_error(const FlowField& pred, const FlowField& truth);

struct SyntheticActivitySpec {
  int class_id = 0;
  std::string name;
  // Motion signature.
  double speed = 2.0;             // px/frame
  double direction = 0.0;         // radians, 0 points +x
  double direction_jitter = 0.3;  // radians, uniform per clip
  double speed_jitter = 0.2;      // relative, uniform per clip
  bool oscillate = false;         // velocity flips sign every frame
  // Appearance signature.
  TextureKind texture = TextureKind::noise;
  int pattern_cell = 8;
  int count = 0;                  // clips to generate
};

void validate(const SyntheticActivitySpec& spec);

struct ActivityDataset {
  std::vector<Clip> train;
  std::vector<Clip> val;
};

// Labeled clips for every spec, split per class at the given train fraction
// with disjoint ids. Clips carry ground-truth flow.
ActivityDataset gen_activity_dataset(
    const std::vector<SyntheticActivitySpec>& specs, double split,
    int frame_count, int height, int width, uint64_t seed);

struct GeoEvent {
  std::string date;  // "YYYY-MM-DD", within the scenario year
  std::vector<std::pair<double, double>> route;  // (lat, lon) polyline
  int count = 0;
  int class_id = 0;
};

struct GeoScenarioSpec {
  int year = 2016;
  GeoBBox bbox;
  std::vector<std::string> class_names;
  std::vector<double> base_rates;      // expected records per class per day
  std::vector<GeoEvent> events;
  std::vector<double> temp_coupling;   // per class, in [-1, 1]
  std::vector<double> precip_coupling; // per class, in [-1, 1]
  double tag_noise_rate = 0.0;
  // True-class tag rewritten to the confusable name at the noise rate.
  std::vector<std::pair<std::string, std::string>> tag_confusions{
      {"soccer", "football"}};
  double score_concentration = 40.0;   // Dirichlet weight on the true class
  double route_jitter = 0.0005;        // degrees, per-axis uniform
  uint64_t seed = 0;
};

void validate(const GeoScenarioSpec& spec);

struct GeoDetections {
  std::vector<DetectionRecord> records;
  std::vector<std::string> mistagged_ids;  // tag disagrees with true class
  long long baseline_count = 0;            // sum of realized Poisson draws
  long long injected_count = 0;            // sum of event counts
};

// Daily Poisson baseline per class inside the bbox, modulated monthly by
// the weather couplings, plus event records placed along their routes on
// their dates. Scores are Dirichlet-perturbed one-hot vectors.
GeoDetections gen_geo_detections(const GeoScenarioSpec& spec,
                                 const WeatherSeries& weather);

}  // namespace actmap
