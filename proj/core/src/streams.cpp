#include "actmap/streams.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "actmap/autograd.hpp"
#include "actmap/ops.hpp"

namespace actmap {
namespace {

int scaled(int channels, double width_scale) {
  return static_cast<int>(std::ceil(channels * width_scale));
}

Tensor gaussian_init(std::vector<int> shape, int fan_in, Rng& rng) {
  return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / fan_in));
}

// Bernoulli keep-mask scaled by 1/(1-p), so inference needs no rescaling.
Tensor dropout_mask(const std::vector<int>& shape, double p, Rng& rng) {
  Tensor mask(shape);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& v : mask.data()) {
    v = uniform01(rng) < p ? 0.0 : keep_scale;
  }
  return mask;
}

}  // namespace

int ClassScores::argmax() const {
  require(!probs.empty(), "scores: empty probability vector");
  int best = 0;
  for (int i = 1; i < size(); ++i) {
    if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

void validate(const ClassScores& s) {
  require(!s.probs.empty(), "scores: empty probability vector");
  double sum = 0.0;
  for (double p : s.probs) {
    require(std::isfinite(p) && p >= 0.0,
            "scores: probabilities must be finite and nonnegative");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-6,
          "scores: probabilities sum to " + std::to_string(sum) +
              ", expected 1");
}

Tensor flow_normalize(const Tensor& flow, double cap) {
  require(cap > 0.0, "flow_normalize: cap must be positive");
  Tensor clipped = clamp(flow, -cap, cap);
  return upsample2x(scale(add(clipped, cap), 1.0 / (2.0 * cap)));
}

void validate(const StreamNetConfig& cfg) {
  require(cfg.width_scale > 0.0 && cfg.width_scale <= 1.0,
          "stream: width_scale must lie in (0,1]");
  require(cfg.in_channels >= 1, "stream: need at least one input channel");
  require(cfg.resolution >= 32 && cfg.resolution % 32 == 0,
          "stream: resolution " + std::to_string(cfg.resolution) +
              " does not survive five 2x pooling stages");
  require(cfg.class_count >= 2, "stream: need at least two classes");
  require(cfg.dropout >= 0.0 && cfg.dropout < 1.0,
          "stream: dropout must lie in [0,1)");
}

StreamNet::StreamNet(const StreamNetConfig& cfg, Rng& rng) : cfg_(cfg) {
  validate(cfg_);
  const double ws = cfg_.width_scale;
  const int c1 = scaled(64, ws);
  const int c2 = scaled(128, ws);
  const int c3 = scaled(256, ws);
  const int c4 = scaled(512, ws);
  const int c5 = scaled(512, ws);
  const int fc = scaled(4096, ws);
  const int tail = cfg_.resolution / 32;

  auto conv = [&](const std::string& name, int cin, int cout) {
    params_.push_back(
        {name + ".w", gaussian_init({cout, cin, 3, 3}, cin * 9, rng)});
    params_.push_back({name + ".b", Tensor::zeros({cout})});
  };
  auto dense = [&](const std::string& name, int din, int dout) {
    params_.push_back({name + ".w", gaussian_init({din, dout}, din, rng)});
    params_.push_back({name + ".b", Tensor::zeros({dout})});
  };

  conv("conv1_1", cfg_.in_channels, c1);
  conv("conv1_2", c1, c1);
  conv("conv2_1", c1, c2);
  conv("conv2_2", c2, c2);
  conv("conv3_1", c2, c3);
  conv("conv3_2", c3, c3);
  conv("conv3_3", c3, c3);
  conv("conv4_1", c3, c4);
  conv("conv4_2", c4, c4);
  conv("conv4_3", c4, c4);
  conv("conv5_1", c4, c5);
  conv("conv5_2", c5, c5);
  conv("conv5_3", c5, c5);
  dense("fc6", c5 * tail * tail, fc);
  dense("fc7", fc, fc);
  dense("fc8", fc, cfg_.class_count);

  for (Parameter& p : params_) p.value.set_requires_grad(true);
}

Tensor StreamNet::param(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return p.value;
  }
  fail("stream: unknown parameter '" + name + "'");
  return {};
}

Tensor StreamNet::logits(const Tensor& input, Rng* dropout_rng) const {
  if (input.ndim() != 4 || input.dim(1) != cfg_.in_channels ||
      input.dim(2) != cfg_.resolution || input.dim(3) != cfg_.resolution) {
    fail("stream: input " + input.shape_str() + " does not match configured " +
         std::to_string(cfg_.in_channels) + "x" +
         std::to_string(cfg_.resolution) + "x" +
         std::to_string(cfg_.resolution));
  }

  auto conv = [&](const Tensor& x, const std::string& name) {
    return relu(conv2d(x, param(name + ".w"), param(name + ".b"), 1, 1));
  };
  auto drop = [&](const Tensor& x) {
    if (dropout_rng == nullptr || cfg_.dropout <= 0.0) return x;
    return mul(x, dropout_mask(x.shape(), cfg_.dropout, *dropout_rng));
  };

  Tensor h = conv(conv(input, "conv1_1"), "conv1_2");
  h = maxpool2d(h, 2, 2);
  h = conv(conv(h, "conv2_1"), "conv2_2");
  h = maxpool2d(h, 2, 2);
  h = conv(conv(conv(h, "conv3_1"), "conv3_2"), "conv3_3");
  h = maxpool2d(h, 2, 2);
  h = conv(conv(conv(h, "conv4_1"), "conv4_2"), "conv4_3");
  h = maxpool2d(h, 2, 2);
  h = conv(conv(conv(h, "conv5_1"), "conv5_2"), "conv5_3");
  h = maxpool2d(h, 2, 2);

  const int n = h.dim(0);
  const int flat = h.dim(1) * h.dim(2) * h.dim(3);
  h = reshape(h, {n, flat});
  h = drop(relu(linear(h, param("fc6.w"), param("fc6.b"))));
  h = drop(relu(linear(h, param("fc7.w"), param("fc7.b"))));
  return linear(h, param("fc8.w"), param("fc8.b"));
}

void validate(const StreamConfig& cfg) {
  require(cfg.frame_count >= 2, "streams: need at least 2 frames per clip");
  require(cfg.fusion_spatial > 0.0 && cfg.fusion_temporal > 0.0,
          "streams: fusion weights must be positive");
  require(cfg.flow_cap > 0.0, "streams: flow cap must be positive");
  StreamNetConfig probe{cfg.width_scale, 3, cfg.input_resolution,
                        cfg.class_count, cfg.dropout};
  validate(probe);
}

StreamNet build_spatial_stream(const StreamConfig& cfg, Rng& rng) {
  validate(cfg);
  StreamNetConfig net{cfg.width_scale, 3, cfg.input_resolution,
                      cfg.class_count, cfg.dropout};
  return StreamNet(net, rng);
}

StreamNet build_temporal_stream(const StreamConfig& cfg, Rng& rng) {
  validate(cfg);
  StreamNetConfig net{cfg.width_scale, 2 * (cfg.frame_count - 1),
                      cfg.input_resolution, cfg.class_count, cfg.dropout};
  return StreamNet(net, rng);
}

ClassScores late_fuse(const ClassScores& s, const ClassScores& t,
                      double w_spatial, double w_temporal) {
  require(w_spatial > 0.0 && w_temporal > 0.0,
          "late_fuse: weights must be positive");
  require(s.size() == t.size() && s.size() > 0,
          "late_fuse: score lengths " + std::to_string(s.size()) + " and " +
              std::to_string(t.size()) + " differ");
  const double total = w_spatial + w_temporal;
  ClassScores out;
  out.probs.resize(s.probs.size());
  for (size_t i = 0; i < s.probs.size(); ++i) {
    out.probs[i] = (w_spatial * s.probs[i] + w_temporal * t.probs[i]) / total;
  }
  return out;
}

TwoStream build_two_stream(const StreamConfig& cfg,
                           const MotionNetConfig& motion_cfg, Rng& rng) {
  validate(cfg);
  validate(motion_cfg);
  require(motion_cfg.height == cfg.input_resolution &&
              motion_cfg.width == cfg.input_resolution,
          "streams: flow estimator resolution " +
              std::to_string(motion_cfg.height) + "x" +
              std::to_string(motion_cfg.width) + " does not match streams (" +
              std::to_string(cfg.input_resolution) + ")");
  require(motion_cfg.frame_count == cfg.frame_count,
          "streams: flow estimator frame count differs from streams");
  StreamNet spatial = build_spatial_stream(cfg, rng);
  MotionNet motion(motion_cfg, rng);
  StreamNet temporal = build_temporal_stream(cfg, rng);
  return TwoStream{cfg, std::move(spatial), std::move(motion),
                   std::move(temporal)};
}

namespace {

ClassScores scores_from_logits(const Tensor& logits) {
  ClassScores s;
  s.probs = softmax_vector(logits.data());
  return s;
}

}  // namespace

ClipScores classify_clip(const TwoStream& ts, const FrameStack& clip) {
  NoGradGuard guard;
  require(clip.tensor.dim(0) == 1, "classify_clip: expected a single clip");
  const int center = ts.cfg.frame_count / 2;

  ClipScores out;
  out.spatial = scores_from_logits(ts.spatial.logits(clip.frame(center)));
  std::vector<FlowField> flows = ts.motion.predict_flows(clip);
  Tensor normalized = flow_normalize(flows.back().tensor, ts.cfg.flow_cap);
  out.temporal = scores_from_logits(ts.temporal.logits(normalized));
  out.fused = late_fuse(out.spatial, out.temporal, ts.cfg.fusion_spatial,
                        ts.cfg.fusion_temporal);
  return out;
}

VideoClassification classify_video(const TwoStream& ts, const Tensor& frames,
                                   double fps, double sample_period) {
  require(fps > 0.0 && sample_period > 0.0,
          "classify_video: fps and sample period must be positive");
  require(frames.ndim() == 4 && frames.dim(0) == 1 && frames.dim(1) % 3 == 0,
          "classify_video: expected frames as [1, 3T, H, W]");
  const int total = frames.dim(1) / 3;
  const int f = ts.cfg.frame_count;
  require(total >= f, "classify_video: video holds " + std::to_string(total) +
                          " frames, need at least " + std::to_string(f));

  const int h = frames.dim(2);
  const int w = frames.dim(3);
  const int stride =
      std::max<int>(1, static_cast<int>(std::lround(sample_period * fps)));

  VideoClassification out;
  out.averaged.probs.assign(static_cast<size_t>(ts.cfg.class_count), 0.0);
  for (int start = 0; start + f <= total; start += stride) {
    Tensor clip({1, 3 * f, h, w});
    std::copy_n(frames.data().begin() + static_cast<size_t>(3 * start) * h * w,
                static_cast<size_t>(3 * f) * h * w, clip.data().begin());
    ClipScores scores = classify_clip(ts, FrameStack(clip));
    for (size_t i = 0; i < out.averaged.probs.size(); ++i) {
      out.averaged.probs[i] += scores.fused.probs[i];
    }
    out.clips.push_back(std::move(scores));
  }
  for (double& p : out.averaged.probs) {
    p /= static_cast<double>(out.clips.size());
  }
  out.label = out.averaged.argmax();
  out.confidence = out.averaged.probs[static_cast<size_t>(out.label)];
  return out;
}

namespace {

// Mirrors the last (column) axis of a [C,H,W] tensor in place.
void mirror_columns(Tensor& t) {
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  auto d = t.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i) {
      double* row = d.data() + (static_cast<size_t>(ch) * h + i) * w;
      std::reverse(row, row + w);
    }
  }
}

void negate_channel(Tensor& t, int ch) {
  const int h = t.dim(1), w = t.dim(2);
  double* p = t.data().data() + static_cast<size_t>(ch) * h * w;
  for (int i = 0; i < h * w; ++i) p[i] = -p[i];
}

Tensor crop_region(const Tensor& t, int r0, int c0, int ch, int cw) {
  const int c = t.dim(0), w = t.dim(2);
  Tensor out({c, ch, cw});
  for (int k = 0; k < c; ++k) {
    for (int i = 0; i < ch; ++i) {
      const double* src = t.data().data() +
                          (static_cast<size_t>(k) * t.dim(1) + r0 + i) * w + c0;
      std::copy_n(src, cw, out.data().begin() +
                               (static_cast<size_t>(k) * ch + i) * cw);
    }
  }
  return out;
}

// Half-pixel-centre bilinear resize of a [C,H,W] tensor.
Tensor resize_bilinear(const Tensor& t, int oh, int ow) {
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  if (oh == h && ow == w) return t;
  Tensor out({c, oh, ow});
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int k = 0; k < c; ++k) {
    const double* src = t.data().data() + static_cast<size_t>(k) * h * w;
    double* dst = out.data().data() + static_cast<size_t>(k) * oh * ow;
    for (int i = 0; i < oh; ++i) {
      double y = std::clamp((i + 0.5) * sy - 0.5, 0.0, h - 1.0);
      int y0 = static_cast<int>(y);
      int y1 = std::min(y0 + 1, h - 1);
      double fy = y - y0;
      for (int j = 0; j < ow; ++j) {
        double x = std::clamp((j + 0.5) * sx - 0.5, 0.0, w - 1.0);
        int x0 = static_cast<int>(x);
        int x1 = std::min(x0 + 1, w - 1);
        double fx = x - x0;
        double top = src[y0 * w + x0] * (1 - fx) + src[y0 * w + x1] * fx;
        double bot = src[y1 * w + x0] * (1 - fx) + src[y1 * w + x1] * fx;
        dst[i * ow + j] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

}  // namespace

Clip augment(const Clip& clip, const AugmentOptions& opt, Rng& rng) {
  require(clip.frames.defined() && clip.frames.ndim() == 3,
          "augment: clip frames must be [3F,H,W]");
  const int h = clip.height();
  const int w = clip.width();

  Clip out = clip;
  out.frames = clip.frames.clone();
  if (clip.flow.defined()) out.flow = clip.flow.clone();

  if (opt.horizontal_flip && uniform01(rng) < 0.5) {
    mirror_columns(out.frames);
    if (out.flow.defined()) {
      mirror_columns(out.flow);
      for (int pair = 0; pair < out.flow.dim(0) / 2; ++pair) {
        negate_channel(out.flow, 2 * pair);
      }
    }
  }

  int ch = h, cw = w;
  if (opt.crop) {
    require(!opt.crop_scales.empty(), "augment: no crop scales configured");
    double s = opt.crop_scales[static_cast<size_t>(uniform_int(
        rng, 0, static_cast<int>(opt.crop_scales.size()) - 1))];
    require(s > 0.0 && s <= 1.0, "augment: crop scale must lie in (0,1]");
    ch = std::max(1, static_cast<int>(std::lround(h * s)));
    cw = std::max(1, static_cast<int>(std::lround(w * s)));
    int corner = uniform_int(rng, 0, 4);
    int r0 = 0, c0 = 0;
    switch (corner) {
      case 0: break;
      case 1: c0 = w - cw; break;
      case 2: r0 = h - ch; break;
      case 3: r0 = h - ch; c0 = w - cw; break;
      default: r0 = (h - ch) / 2; c0 = (w - cw) / 2; break;
    }
    if (ch != h || cw != w) {
      out.frames = crop_region(out.frames, r0, c0, ch, cw);
      if (out.flow.defined()) {
        out.flow = crop_region(out.flow, r0, c0, ch, cw);
      }
    }
  }

  const int oh = opt.output_resolution > 0 ? opt.output_resolution : h;
  const int ow = opt.output_resolution > 0 ? opt.output_resolution : w;
  if (oh != ch || ow != cw) {
    out.frames = resize_bilinear(out.frames, oh, ow);
    if (out.flow.defined()) {
      out.flow = resize_bilinear(out.flow, oh, ow);
      const double rx = static_cast<double>(ow) / cw;
      const double ry = static_cast<double>(oh) / ch;
      auto d = out.flow.data();
      const size_t plane = static_cast<size_t>(oh) * ow;
      for (int pair = 0; pair < out.flow.dim(0) / 2; ++pair) {
        double* vx = d.data() + static_cast<size_t>(2 * pair) * plane;
        double* vy = vx + plane;
        for (size_t i = 0; i < plane; ++i) {
          vx[i] *= rx;
          vy[i] *= ry;
        }
      }
    }
  }
  return out;
}

EvalReport evaluate(const TwoStream& ts, const std::vector<Clip>& clips) {
  require(!clips.empty(), "evaluate: empty dataset");
  const int m = ts.cfg.class_count;
  EvalReport report;
  report.confusion.assign(static_cast<size_t>(m),
                          std::vector<long long>(static_cast<size_t>(m), 0));

  const auto t0 = std::chrono::steady_clock::now();
  for (const Clip& clip : clips) {
    require(clip.label >= 0 && clip.label < m,
            "evaluate: clip '" + clip.id + "' has label " +
                std::to_string(clip.label) + ", expected [0," +
                std::to_string(m) + ")");
    Tensor batch = reshape(clip.frames, {1, clip.frames.dim(0),
                                         clip.frames.dim(1),
                                         clip.frames.dim(2)});
    ClipScores scores = classify_clip(ts, FrameStack(batch));
    int predicted = scores.fused.argmax();
    report.confusion[static_cast<size_t>(clip.label)]
                    [static_cast<size_t>(predicted)]++;
    report.clip_count++;
    report.frame_count += clip.frame_count();
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double seconds = std::chrono::duration<double>(t1 - t0).count();
  report.fps = seconds > 0.0 ? static_cast<double>(report.frame_count) / seconds
                             : 0.0;

  int present = 0;
  report.per_class.assign(static_cast<size_t>(m), 0.0);
  for (int c = 0; c < m; ++c) {
    long long row = 0;
    for (long long n : report.confusion[static_cast<size_t>(c)]) row += n;
    if (row == 0) continue;
    report.per_class[static_cast<size_t>(c)] =
        static_cast<double>(
            report.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)]) /
        static_cast<double>(row);
    report.accuracy += report.per_class[static_cast<size_t>(c)];
    present++;
  }
  if (present > 0) report.accuracy /= present;
  return report;
}

BenchReport bench_throughput(const TwoStream& ts,
                             const std::vector<Clip>& clips, int repeat) {
  require(!clips.empty(), "bench: empty dataset");
  require(repeat >= 1, "bench: repeat must be >= 1");
  BenchReport report;
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeat; ++r) {
    for (const Clip& clip : clips) {
      Tensor batch = reshape(clip.frames, {1, clip.frames.dim(0),
                                           clip.frames.dim(1),
                                           clip.frames.dim(2)});
      classify_clip(ts, FrameStack(batch));
      report.clip_count++;
      report.frame_count += clip.frame_count();
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  report.seconds = std::chrono::duration<double>(t1 - t0).count();
  report.fps = report.seconds > 0.0
                   ? static_cast<double>(report.frame_count) / report.seconds
                   : 0.0;
  return report;
}

}  // namespace actmap
