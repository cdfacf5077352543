#include <algorithm>
#include <cmath>
#include <cstdio>

#include "actmap/autograd.hpp"
#include "actmap/common.hpp"
#include "actmap/ops.hpp"
#include "actmap/synth.hpp"

namespace actmap {

TextureKind texture_from_string(const std::string& s) {
  if (s == "noise") return TextureKind::noise;
  if (s == "ramp") return TextureKind::ramp;
  if (s == "checker") return TextureKind::checker;
  fail("unknown texture kind '" + s + "' (noise|ramp|checker)");
}

std::string to_string(TextureKind kind) {
  switch (kind) {
    case TextureKind::noise: return "noise";
    case TextureKind::ramp: return "ramp";
    case TextureKind::checker: return "checker";
  }
  fail("bad texture kind value");
}

namespace {

// Random values on a coarse lattice, bilinearly interpolated between nodes.
void add_value_noise(Tensor& out, int channel, int cell, double weight,
                     Rng& rng) {
  const int h = out.dim(2), w = out.dim(3);
  const int nodes_h = (h - 1) / cell + 2;
  const int nodes_w = (w - 1) / cell + 2;
  std::vector<double> grid(size_t(nodes_h) * nodes_w);
  for (double& g : grid) g = uniform01(rng);
  for (int i = 0; i < h; ++i) {
    const double gi = double(i) / cell;
    const int a = int(gi);
    const double fy = gi - a;
    for (int j = 0; j < w; ++j) {
      const double gj = double(j) / cell;
      const int b = int(gj);
      const double fx = gj - b;
      const double* row0 = &grid[size_t(a) * nodes_w + b];
      const double* row1 = row0 + nodes_w;
      const double v = (1.0 - fy) * ((1.0 - fx) * row0[0] + fx * row0[1]) +
                       fy * ((1.0 - fx) * row1[0] + fx * row1[1]);
      out.at({0, channel, i, j}) += weight * v;
    }
  }
}

}  // namespace

Tensor make_texture(TextureKind kind, int height, int width, int cell,
                    Rng& rng) {
  require(height >= 4 && width >= 4,
          "texture needs at least 4x4 pixels, got " + std::to_string(height) +
              "x" + std::to_string(width));
  require(cell >= 1, "pattern cell must be >= 1");
  Tensor out = Tensor::zeros({1, 3, height, width});
  switch (kind) {
    case TextureKind::noise:
      for (int c = 0; c < 3; ++c) {
        add_value_noise(out, c, cell, 0.65, rng);
        add_value_noise(out, c, std::max(2, cell / 3), 0.35, rng);
      }
      break;
    case TextureKind::ramp:
      for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
          const double rx = double(j) / (width - 1);
          const double ry = double(i) / (height - 1);
          out.at({0, 0, i, j}) = rx;
          out.at({0, 1, i, j}) = ry;
          out.at({0, 2, i, j}) = 0.5 * (rx + ry);
        }
      break;
    case TextureKind::checker:
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < height; ++i)
          for (int j = 0; j < width; ++j)
            out.at({0, c, i, j}) = ((i / cell + j / cell) % 2) ? 0.9 : 0.1;
      break;
  }
  return out;
}

Tensor shift_frame(const Tensor& frame, double vx, double vy) {
  NoGradGuard off;
  const int h = frame.dim(2), w = frame.dim(3);
  Tensor flow = Tensor::zeros({frame.dim(0), 2, h, w});
  auto d = flow.data();
  const size_t plane = size_t(h) * w;
  for (int n = 0; n < frame.dim(0); ++n) {
    std::fill_n(d.begin() + size_t(n) * 2 * plane, plane, -vx);
    std::fill_n(d.begin() + (size_t(n) * 2 + 1) * plane, plane, -vy);
  }
  return inverse_warp(frame, flow);
}

void validate(const SyntheticClipSpec& spec) {
  require(std::isfinite(spec.vx) && std::isfinite(spec.vy),
          "velocity must be finite");
  require(std::hypot(spec.vx, spec.vy) <= kFlowCap,
          "|velocity| must be <= " + std::to_string(kFlowCap) + " px, got (" +
              std::to_string(spec.vx) + "," + std::to_string(spec.vy) + ")");
  require(spec.frame_count >= 2, "clip needs at least 2 frames");
  require(spec.height >= 4 && spec.width >= 4,
          "resolution must be at least 4x4");
}

namespace {

Tensor constant_flow(int pairs, int h, int w,
                     const std::vector<std::pair<double, double>>& v) {
  Tensor flow = Tensor::zeros({1, 2 * pairs, h, w});
  auto d = flow.data();
  const size_t plane = size_t(h) * w;
  for (int p = 0; p < pairs; ++p) {
    std::fill_n(d.begin() + size_t(2 * p) * plane, plane, v[size_t(p)].first);
    std::fill_n(d.begin() + size_t(2 * p + 1) * plane, plane,
                v[size_t(p)].second);
  }
  return flow;
}

}  // namespace

GeneratedClip gen_clip(const SyntheticClipSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  Tensor frame = make_texture(spec.texture, spec.height, spec.width, 8, rng);
  std::vector<Tensor> frames{frame};
  for (int t = 1; t < spec.frame_count; ++t) {
    frame = shift_frame(frame, spec.vx, spec.vy);
    frames.push_back(frame);
  }
  const int pairs = spec.frame_count - 1;
  const std::vector<std::pair<double, double>> v(
      size_t(pairs), {spec.vx, spec.vy});
  return {FrameStack(concat_channels(frames)),
          FlowField(constant_flow(pairs, spec.height, spec.width, v))};
}

int interior_margin(double vx, double vy) {
  return int(std::ceil(std::hypot(vx, vy))) + 1;
}

double endpoint_error(const FlowField& pred, const FlowField& truth) {
  require(pred.tensor.shape() == truth.tensor.shape(),
          "flow shapes differ: " + pred.tensor.shape_str() + " vs " +
              truth.tensor.shape_str());
  const auto p = pred.tensor.data();
  const auto t = truth.tensor.data();
  const int n = pred.tensor.dim(0);
  const int pairs = pred.pairs();
  const size_t plane = size_t(pred.height()) * pred.width();
  double sum = 0.0;
  for (int b = 0; b < n; ++b)
    for (int k = 0; k < pairs; ++k) {
      const size_t ox = (size_t(b) * pairs * 2 + size_t(2 * k)) * plane;
      const size_t oy = ox + plane;
      for (size_t i = 0; i < plane; ++i) {
        const double dx = p[ox + i] - t[ox + i];
        const double dy = p[oy + i] - t[oy + i];
        sum += std::sqrt(dx * dx + dy * dy);
      }
    }
  return sum / (double(n) * pairs * double(plane));
}

void validate(const SyntheticActivitySpec& spec) {
  require(!spec.name.empty(), "activity class needs a name");
  require(spec.count >= 2, "activity class '" + spec.name +
                               "' needs count >= 2, got " +
                               std::to_string(spec.count));
  require(std::isfinite(spec.speed) && spec.speed >= 0.0,
          "speed must be nonnegative");
  require(spec.speed_jitter >= 0.0 && spec.speed_jitter <= 1.0,
          "speed_jitter must be in [0,1]");
  require(std::isfinite(spec.direction) && spec.direction_jitter >= 0.0,
          "direction parameters must be finite, jitter nonnegative");
  require(spec.speed * (1.0 + spec.speed_jitter) <= kFlowCap,
          "fastest clip of class '" + spec.name + "' would exceed " +
              std::to_string(kFlowCap) + " px/frame");
  require(spec.pattern_cell >= 1, "pattern cell must be >= 1");
}

ActivityDataset gen_activity_dataset(
    const std::vector<SyntheticActivitySpec>& specs, double split,
    int frame_count, int height, int width, uint64_t seed) {
  require(!specs.empty(), "need at least one activity class");
  require(split > 0.0 && split < 1.0,
          "split must be in (0,1), got " + std::to_string(split));
  require(frame_count >= 2, "clips need at least 2 frames");
  for (const SyntheticActivitySpec& spec : specs) {
    validate(spec);
    require(spec.class_id >= 0 && spec.class_id < int(specs.size()),
            "class ids must be dense in [0, class count)");
    for (const SyntheticActivitySpec& other : specs) {
      if (&other == &spec) break;
      require(other.class_id != spec.class_id,
              "duplicate class id " + std::to_string(spec.class_id));
      require(other.name != spec.name, "duplicate class name " + spec.name);
    }
  }

  Rng rng(seed);
  const int pairs = frame_count - 1;
  ActivityDataset out;
  for (const SyntheticActivitySpec& spec : specs) {
    const int n_train =
        std::clamp<int>(int(std::lround(split * spec.count)), 1,
                        spec.count - 1);
    for (int k = 0; k < spec.count; ++k) {
      const double theta =
          spec.direction + spec.direction_jitter * uniform(rng, -1.0, 1.0);
      const double speed =
          spec.speed * (1.0 + spec.speed_jitter * uniform(rng, -1.0, 1.0));
      const double vx = speed * std::cos(theta);
      const double vy = speed * std::sin(theta);

      Tensor frame =
          make_texture(spec.texture, height, width, spec.pattern_cell, rng);
      std::vector<Tensor> frames{frame};
      std::vector<std::pair<double, double>> velocities;
      for (int t = 0; t < pairs; ++t) {
        const double sign = (spec.oscillate && t % 2) ? -1.0 : 1.0;
        velocities.emplace_back(sign * vx, sign * vy);
        frame = shift_frame(frame, velocities.back().first,
                            velocities.back().second);
        frames.push_back(frame);
      }

      char tail[16];
      std::snprintf(tail, sizeof tail, "_%04d", k);
      Clip clip;
      clip.id = spec.name + tail;
      clip.frames =
          reshape(concat_channels(frames), {3 * frame_count, height, width});
      clip.flow = reshape(constant_flow(pairs, height, width, velocities),
                          {2 * pairs, height, width});
      clip.label = spec.class_id;
      (k < n_train ? out.train : out.val).push_back(std::move(clip));
    }
  }
  return out;
}

}  // namespace actmap
