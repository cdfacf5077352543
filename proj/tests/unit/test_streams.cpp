#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "actmap/autograd.hpp"
#include "actmap/ops.hpp"
#include "actmap/streams.hpp"
#include "actmap/synth.hpp"

using namespace actmap;

namespace {

template <typename Fn>
std::string error_text(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

bool error_mentions(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

std::map<std::string, std::vector<int>> param_shapes(const StreamNet& net) {
  std::map<std::string, std::vector<int>> m;
  for (const Parameter& p : net.params()) m[p.name] = p.value.shape();
  return m;
}

void zero_head(StreamNet& net) {
  for (Parameter& p : net.params()) {
    if (p.name == "fc8.w" || p.name == "fc8.b") {
      std::fill(p.value.data().begin(), p.value.data().end(), 0.0);
    }
  }
}

// A fresh flow estimator predicts zero displacement everywhere, making the
// temporal stream blind to the frames.  Give the flow heads nonzero weights
// when a test needs flow that reacts to the input.
void randomize_flow_heads(MotionNet& net, uint64_t seed) {
  Rng rng(seed);
  for (Parameter& p : net.params()) {
    if (p.name.rfind("flow", 0) == 0) {
      Tensor r = Tensor::randn(p.value.shape(), rng, 0.2);
      std::copy(r.data().begin(), r.data().end(), p.value.data().begin());
    }
  }
}

StreamConfig small_stream_config() {
  StreamConfig cfg;
  cfg.width_scale = 0.0625;
  cfg.input_resolution = 32;
  cfg.frame_count = 3;
  cfg.class_count = 4;
  return cfg;
}

MotionNetConfig small_motion_config() {
  MotionNetConfig cfg;
  cfg.width_scale = 0.0625;
  cfg.frame_count = 3;
  cfg.height = 32;
  cfg.width = 32;
  return cfg;
}

TwoStream small_two_stream(uint64_t seed = 9) {
  Rng rng(seed);
  return build_two_stream(small_stream_config(), small_motion_config(), rng);
}

FrameStack moving_clip(double vx, double vy, uint64_t seed = 21) {
  SyntheticClipSpec spec;
  spec.vx = vx;
  spec.vy = vy;
  spec.frame_count = 3;
  spec.height = 32;
  spec.width = 32;
  spec.seed = seed;
  return gen_clip(spec).frames;
}

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data();
  auto db = b.data();
  for (size_t i = 0; i < da.size(); ++i) {
    if (da[i] != db[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("flow normalization maps the clip range onto [0,1] at 2x size") {
  Tensor flow = Tensor::zeros({1, 2, 4, 4});
  Tensor out = flow_normalize(flow, 20.0);
  CHECK(out.shape() == std::vector<int>{1, 2, 8, 8});
  for (double v : out.data()) CHECK(v == 0.5);

  Tensor extremes = Tensor::from_data({1, 2, 1, 1}, {20.0, -20.0});
  Tensor mapped = flow_normalize(extremes, 20.0);
  CHECK(mapped.shape() == std::vector<int>{1, 2, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(mapped.data()[size_t(i)] == 1.0);
  for (int i = 4; i < 8; ++i) CHECK(mapped.data()[size_t(i)] == 0.0);

  Tensor outside = Tensor::from_data({1, 2, 1, 1}, {40.0, -31.0});
  Tensor clipped = flow_normalize(outside, 20.0);
  for (int i = 0; i < 4; ++i) CHECK(clipped.data()[size_t(i)] == 1.0);
  for (int i = 4; i < 8; ++i) CHECK(clipped.data()[size_t(i)] == 0.0);

  CHECK(error_mentions(error_text([] {
          flow_normalize(Tensor::zeros({1, 2, 2, 2}), 0.0);
        }),
        "cap"));
}

TEST_CASE("flow normalization is differentiable away from the clip bound") {
  Rng rng(3);
  Tensor point = Tensor::rand({1, 2, 3, 3}, rng, -10.0, 10.0);
  auto fn = [](const Tensor& x) { return reduce_mean(flow_normalize(x, 20.0)); };
  CHECK(gradient_check(fn, point, 1e-6) < 1e-6);
}

TEST_CASE("argmax breaks ties toward the lowest class") {
  CHECK(ClassScores{{0.2, 0.5, 0.3}}.argmax() == 1);
  CHECK(ClassScores{{0.4, 0.4, 0.2}}.argmax() == 0);
  CHECK(ClassScores{{0.25, 0.25, 0.25, 0.25}}.argmax() == 0);
  CHECK_THROWS(ClassScores{}.argmax());
}

TEST_CASE("score vectors must be nonnegative and normalized") {
  validate(ClassScores{{0.25, 0.75}});
  CHECK(error_mentions(
      error_text([] { validate(ClassScores{{0.7, 0.7}}); }), "sum"));
  CHECK(error_mentions(
      error_text([] { validate(ClassScores{{1.2, -0.2}}); }), "nonnegative"));
}

TEST_CASE("late fusion at the default ratio weighs temporal 3:2") {
  ClassScores fused = late_fuse({{1.0, 0.0}}, {{0.0, 1.0}}, 1.0, 1.5);
  CHECK(fused.probs[0] == 0.4);
  CHECK(fused.probs[1] == 0.6);
}

TEST_CASE("late fusion is a convex combination") {
  ClassScores s{{0.7, 0.2, 0.1}};
  ClassScores t{{0.1, 0.3, 0.6}};

  ClassScores same = late_fuse(s, s, 1.0, 1.5);
  for (int i = 0; i < 3; ++i) {
    CHECK(same.probs[size_t(i)] == doctest::Approx(s.probs[size_t(i)]));
  }

  ClassScores fused = late_fuse(s, t, 1.0, 1.5);
  double sum = 0.0;
  for (double p : fused.probs) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  ClassScores rescaled = late_fuse(s, t, 7.0, 10.5);
  CHECK(rescaled.argmax() == fused.argmax());
  for (int i = 0; i < 3; ++i) {
    CHECK(rescaled.probs[size_t(i)] ==
          doctest::Approx(fused.probs[size_t(i)]).epsilon(1e-12));
  }

  CHECK(error_mentions(
      error_text([&] { late_fuse(s, {{0.5, 0.5}}, 1.0, 1.5); }), "lengths"));
  CHECK(error_mentions(
      error_text([&] { late_fuse(s, t, 0.0, 1.5); }), "positive"));
}

TEST_CASE("full-width temporal column matches the reference stack") {
  StreamConfig cfg;
  cfg.width_scale = 1.0;
  cfg.input_resolution = 32;
  cfg.frame_count = 11;
  cfg.class_count = 10;
  Rng rng(1);
  StreamNet net = build_temporal_stream(cfg, rng);
  auto shapes = param_shapes(net);
  CHECK(shapes.at("conv1_1.w") == std::vector<int>{64, 20, 3, 3});
  CHECK(shapes.at("conv5_3.w") == std::vector<int>{512, 512, 3, 3});
  CHECK(shapes.at("fc7.w") == std::vector<int>{4096, 4096});
  CHECK(shapes.at("fc8.w") == std::vector<int>{4096, 10});
}

TEST_CASE("scaled-down columns follow the shape propagation rule") {
  // Independent propagation: channels ceil(c*ws) through blocks
  // (64,128,256,512,512), resolution halved at each of the five pools.
  const double ws = 0.0625;
  const int res = 64;
  const int m = 5;
  int spatial = res;
  int channels = 0;
  for (int block : {64, 128, 256, 512, 512}) {
    channels = static_cast<int>(std::ceil(block * ws));
    spatial /= 2;
  }
  const int fc = static_cast<int>(std::ceil(4096 * ws));
  const int flat = channels * spatial * spatial;

  StreamConfig cfg;
  cfg.width_scale = ws;
  cfg.input_resolution = res;
  cfg.frame_count = 3;
  cfg.class_count = m;
  Rng rng(2);
  StreamNet spatial_net = build_spatial_stream(cfg, rng);
  auto shapes = param_shapes(spatial_net);
  CHECK(shapes.at("conv1_1.w") == std::vector<int>{4, 3, 3, 3});
  CHECK(shapes.at("fc6.w") == std::vector<int>{flat, fc});
  CHECK(shapes.at("fc7.w") == std::vector<int>{fc, fc});
  CHECK(shapes.at("fc8.w") == std::vector<int>{fc, m});

  StreamNet temporal_net = build_temporal_stream(cfg, rng);
  CHECK(param_shapes(temporal_net).at("conv1_1.w") ==
        std::vector<int>{4, 4, 3, 3});

  Rng drng(5);
  Tensor logits = spatial_net.logits(Tensor::rand({2, 3, res, res}, drng));
  CHECK(logits.shape() == std::vector<int>{2, m});
}

TEST_CASE("resolutions that do not survive five pools are rejected") {
  StreamConfig cfg = small_stream_config();
  cfg.input_resolution = 48;
  Rng rng(4);
  CHECK(error_mentions(
      error_text([&] { build_spatial_stream(cfg, rng); }), "pooling"));

  StreamConfig bad_classes = small_stream_config();
  bad_classes.class_count = 1;
  CHECK(error_mentions(
      error_text([&] { build_spatial_stream(bad_classes, rng); }), "classes"));
}

TEST_CASE("inference is deterministic and dropout is training-only") {
  StreamConfig cfg = small_stream_config();
  Rng rng(6);
  StreamNet net = build_spatial_stream(cfg, rng);
  Rng drng(7);
  Tensor input = Tensor::rand({2, 3, 32, 32}, drng);

  Tensor a = net.logits(input);
  Tensor b = net.logits(input);
  CHECK(same_values(a, b));

  Rng d1(8);
  Rng d2(8);
  Tensor c = net.logits(input, &d1);
  Tensor d = net.logits(input, &d2);
  CHECK(same_values(c, d));
  CHECK_FALSE(same_values(a, c));
}

TEST_CASE("mismatched flow estimator and stream geometry is rejected") {
  StreamConfig cfg = small_stream_config();
  MotionNetConfig motion = small_motion_config();
  motion.height = 64;
  motion.width = 64;
  Rng rng(9);
  CHECK(error_mentions(
      error_text([&] { build_two_stream(cfg, motion, rng); }), "resolution"));

  MotionNetConfig frames = small_motion_config();
  frames.frame_count = 5;
  CHECK(error_mentions(
      error_text([&] { build_two_stream(cfg, frames, rng); }), "frame count"));
}

TEST_CASE("untrained zero-head streams score every class equally") {
  TwoStream ts = small_two_stream();
  zero_head(ts.spatial);
  zero_head(ts.temporal);
  ClipScores scores = classify_clip(ts, moving_clip(1.5, -0.5));
  for (double p : scores.fused.probs) CHECK(p == doctest::Approx(0.25));
  validate(scores.spatial);
  validate(scores.temporal);
  validate(scores.fused);
}

TEST_CASE("classification is deterministic") {
  TwoStream ts = small_two_stream();
  FrameStack clip = moving_clip(2.0, 0.5);
  ClipScores a = classify_clip(ts, clip);
  ClipScores b = classify_clip(ts, clip);
  CHECK(a.spatial.probs == b.spatial.probs);
  CHECK(a.temporal.probs == b.temporal.probs);
  CHECK(a.fused.probs == b.fused.probs);
}

TEST_CASE("the spatial stream reads only the center frame") {
  TwoStream ts = small_two_stream();
  randomize_flow_heads(ts.motion, 31);
  FrameStack clip = moving_clip(1.0, 0.0);

  FrameStack edited_first(clip.tensor.clone());
  for (int c = 0; c < 3; ++c) {
    edited_first.tensor.at({0, c, 10, 10}) = 0.0;
    edited_first.tensor.at({0, c, 10, 11}) = 1.0;
  }
  ClipScores base = classify_clip(ts, clip);
  ClipScores moved_first = classify_clip(ts, edited_first);
  CHECK(base.spatial.probs == moved_first.spatial.probs);
  CHECK(base.temporal.probs != moved_first.temporal.probs);

  FrameStack edited_center(clip.tensor.clone());
  for (int c = 3; c < 6; ++c) {
    edited_center.tensor.at({0, c, 10, 10}) = 0.0;
    edited_center.tensor.at({0, c, 10, 11}) = 1.0;
  }
  ClipScores moved_center = classify_clip(ts, edited_center);
  CHECK(base.spatial.probs != moved_center.spatial.probs);
}

TEST_CASE("a video of exactly one clip reduces to clip classification") {
  TwoStream ts = small_two_stream();
  FrameStack clip = moving_clip(1.2, 0.8);
  ClipScores direct = classify_clip(ts, clip);
  VideoClassification video = classify_video(ts, clip.tensor, 10.0, 1.0);
  CHECK(video.clips.size() == 1);
  CHECK(video.label == direct.fused.argmax());
  CHECK(video.averaged.probs == direct.fused.probs);
}

TEST_CASE("video scores average the sampled clips") {
  TwoStream ts = small_two_stream();
  SyntheticClipSpec spec;
  spec.vx = 1.0;
  spec.vy = 0.0;
  spec.frame_count = 5;
  spec.height = 32;
  spec.width = 32;
  spec.seed = 31;
  Tensor video = gen_clip(spec).frames.tensor;  // [1, 15, 32, 32]

  VideoClassification out = classify_video(ts, video, 1.0, 1.0);
  CHECK(out.clips.size() == 3);

  std::vector<double> expected(4, 0.0);
  for (int start = 0; start < 3; ++start) {
    Tensor window({1, 9, 32, 32});
    std::copy_n(video.data().begin() + size_t(3 * start) * 32 * 32,
                size_t(9) * 32 * 32, window.data().begin());
    ClipScores scores = classify_clip(ts, FrameStack(window));
    for (int i = 0; i < 4; ++i) expected[size_t(i)] += scores.fused.probs[size_t(i)] / 3.0;
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(out.averaged.probs[size_t(i)] ==
          doctest::Approx(expected[size_t(i)]).epsilon(1e-12));
  }
  CHECK(out.confidence == out.averaged.probs[size_t(out.label)]);

  // Frame-rate metadata that leaves the clip stride unchanged cannot change
  // the label.
  VideoClassification same = classify_video(ts, video, 2.0, 0.5);
  CHECK(same.label == out.label);
  CHECK(same.clips.size() == out.clips.size());
}

TEST_CASE("too-short videos are rejected") {
  TwoStream ts = small_two_stream();
  Tensor short_video = Tensor::zeros({1, 6, 32, 32});
  CHECK(error_mentions(error_text([&] {
          classify_video(ts, short_video, 10.0, 1.0);
        }),
        "need at least"));
}

TEST_CASE("uniform clip scores resolve to class zero") {
  TwoStream ts = small_two_stream();
  zero_head(ts.spatial);
  zero_head(ts.temporal);
  VideoClassification out =
      classify_video(ts, moving_clip(0.5, 0.5).tensor, 10.0, 1.0);
  CHECK(out.label == 0);
  CHECK(out.confidence == doctest::Approx(0.25));
}

TEST_CASE("augmenting twice with the same draws undoes a flip") {
  GeneratedClip gen = gen_clip({TextureKind::noise, 1.0, -2.0, 3, 32, 32, 17});
  Clip clip;
  clip.id = "aug";
  clip.frames = reshape(gen.frames.tensor, {9, 32, 32});
  clip.flow = reshape(gen.flow.tensor, {4, 32, 32});

  AugmentOptions flip_only;
  flip_only.crop = false;

  bool saw_flip = false;
  bool saw_identity = false;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng r1(seed);
    Rng r2(seed);
    Clip once = augment(clip, flip_only, r1);
    Clip twice = augment(once, flip_only, r2);
    CHECK(same_values(twice.frames, clip.frames));
    CHECK(same_values(twice.flow, clip.flow));
    if (same_values(once.frames, clip.frames)) {
      saw_identity = true;
    } else {
      saw_flip = true;
    }
  }
  CHECK(saw_flip);
  CHECK(saw_identity);
}

TEST_CASE("a flip mirrors frames and negates the horizontal flow") {
  GeneratedClip gen = gen_clip({TextureKind::noise, 1.5, -0.5, 3, 32, 32, 19});
  Clip clip;
  clip.id = "flip";
  clip.frames = reshape(gen.frames.tensor, {9, 32, 32});
  clip.flow = reshape(gen.flow.tensor, {4, 32, 32});

  AugmentOptions flip_only;
  flip_only.crop = false;

  // Find a seed whose first coin lands on "flip".
  uint64_t seed = 0;
  for (;; ++seed) {
    Rng probe(seed);
    if (uniform01(probe) < 0.5) break;
  }
  Rng rng(seed);
  Clip flipped = augment(clip, flip_only, rng);

  for (int c = 0; c < 9; c += 4) {
    for (int j = 0; j < 32; ++j) {
      CHECK(flipped.frames.at({c, 7, j}) == clip.frames.at({c, 7, 31 - j}));
    }
  }
  for (int i = 0; i < 32; i += 7) {
    for (int j = 0; j < 32; j += 7) {
      CHECK(flipped.flow.at({0, i, j}) == -1.5);
      CHECK(flipped.flow.at({1, i, j}) == -0.5);
      CHECK(flipped.flow.at({2, i, j}) == -1.5);
      CHECK(flipped.flow.at({3, i, j}) == -0.5);
    }
  }
}

TEST_CASE("crops land on the corner the draws select") {
  GeneratedClip gen = gen_clip({TextureKind::noise, 0.5, 0.5, 3, 32, 32, 23});
  Clip clip;
  clip.id = "crop";
  clip.frames = reshape(gen.frames.tensor, {9, 32, 32});

  AugmentOptions opt;
  opt.horizontal_flip = false;
  opt.crop_scales = {0.5};
  opt.output_resolution = 16;  // crop size, so no resize happens

  bool corners[5] = {false, false, false, false, false};
  for (uint64_t seed = 0; seed < 40 && !(corners[0] && corners[1] &&
                                         corners[2] && corners[3] &&
                                         corners[4]);
       ++seed) {
    Rng replay(seed);
    (void)uniform_int(replay, 0, 0);  // scale index
    int corner = uniform_int(replay, 0, 4);
    int r0 = (corner == 2 || corner == 3) ? 16 : (corner == 4 ? 8 : 0);
    int c0 = (corner == 1 || corner == 3) ? 16 : (corner == 4 ? 8 : 0);
    corners[corner] = true;

    Rng rng(seed);
    Clip cropped = augment(clip, opt, rng);
    CHECK(cropped.frames.shape() == std::vector<int>{9, 16, 16});
    for (int c = 0; c < 9; c += 5) {
      for (int i = 0; i < 16; i += 3) {
        for (int j = 0; j < 16; j += 3) {
          CHECK(cropped.frames.at({c, i, j}) ==
                clip.frames.at({c, r0 + i, c0 + j}));
        }
      }
    }
  }
  for (bool seen : corners) CHECK(seen);
}

TEST_CASE("resizing a cropped clip rescales ground-truth flow") {
  GeneratedClip gen = gen_clip({TextureKind::noise, 2.0, -1.0, 3, 32, 32, 29});
  Clip clip;
  clip.id = "resize";
  clip.frames = reshape(gen.frames.tensor, {9, 32, 32});
  clip.flow = reshape(gen.flow.tensor, {4, 32, 32});

  AugmentOptions opt;
  opt.horizontal_flip = false;
  opt.crop_scales = {0.5};
  opt.output_resolution = 32;  // 16x16 crop stretched back to 32x32

  Rng rng(11);
  Clip out = augment(clip, opt, rng);
  CHECK(out.frames.shape() == std::vector<int>{9, 32, 32});
  CHECK(out.flow.shape() == std::vector<int>{4, 32, 32});
  for (int i = 0; i < 32; i += 9) {
    for (int j = 0; j < 32; j += 9) {
      CHECK(out.flow.at({0, i, j}) == doctest::Approx(4.0));
      CHECK(out.flow.at({1, i, j}) == doctest::Approx(-2.0));
    }
  }
}

TEST_CASE("augmented output always matches the requested resolution") {
  GeneratedClip gen = gen_clip({TextureKind::checker, 1.0, 1.0, 3, 32, 32, 37});
  Clip clip;
  clip.id = "shape";
  clip.frames = reshape(gen.frames.tensor, {9, 32, 32});

  AugmentOptions opt;
  opt.crop_scales = {1.0, 0.875, 0.75};
  opt.output_resolution = 32;
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Clip out = augment(clip, opt, rng);
    CHECK(out.frames.shape() == std::vector<int>{9, 32, 32});
  }
}
