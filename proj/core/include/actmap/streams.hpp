#pragma once

#include <optional>
#include <string>
#include <vector>

#include "actmap/common.hpp"
#include "actmap/dataset.hpp"
#include "actmap/flow.hpp"
#include "actmap/motionnet.hpp"
#include "actmap/optim.hpp"
#include "actmap/tensor.hpp"

namespace actmap {

// Probability vector over activity classes.
struct ClassScores {
  std::vector<double> probs;

  int size() const { return static_cast<int>(probs.size()); }
  // Highest-probability class; ties break toward the lowest index.
  int argmax() const;
};

void validate(const ClassScores& s);

// Clips flow values to [-cap, cap], maps them affinely onto [0,1] and
// bilinearly doubles the resolution, so the finest half-resolution flow
// matches the classifier input size. Differentiable, which is what lets the
// flow estimator and the temporal classifier train as one stack.
Tensor flow_normalize(const Tensor& flow, double cap = kFlowCap);

struct StreamNetConfig {
  double width_scale = 1.0;
  int in_channels = 3;
  int resolution = 224;  // must survive the five 2x pooling stages
  int class_count = 0;
  double dropout = 0.5;
};

void validate(const StreamNetConfig& cfg);

// VGG-style classifier column: five 3x3 conv blocks (2,2,3,3,3 layers),
// each closed by a 2x2 max pool, then two fully connected layers with
// ReLU and dropout, and a class-count-way linear head.
class StreamNet {
 public:
  StreamNet(const StreamNetConfig& cfg, Rng& rng);

  // Class logits [N, M] for an [N, C, R, R] input. A non-null rng enables
  // dropout after fc6/fc7 (training mode); inference is deterministic.
  Tensor logits(const Tensor& input, Rng* dropout_rng = nullptr) const;

  const StreamNetConfig& config() const { return cfg_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

 private:
  Tensor param(const std::string& name) const;

  StreamNetConfig cfg_;
  ParamList params_;
};

struct StreamConfig {
  double width_scale = 1.0;
  int input_resolution = 224;
  int frame_count = 11;  // F; the temporal stream reads 2(F-1) flow channels
  int class_count = 0;
  double fusion_spatial = 1.0;
  double fusion_temporal = 1.5;
  double dropout = 0.5;
  double flow_cap = kFlowCap;
};

void validate(const StreamConfig& cfg);

// The spatial stream reads one RGB frame; the temporal stream reads the
// normalized finest-scale flow of the whole clip.
StreamNet build_spatial_stream(const StreamConfig& cfg, Rng& rng);
StreamNet build_temporal_stream(const StreamConfig& cfg, Rng& rng);

// Weighted average of two probability vectors: (w_s*s + w_t*t)/(w_s + w_t).
ClassScores late_fuse(const ClassScores& s, const ClassScores& t,
                      double w_spatial, double w_temporal);

// Full two-stream classifier: an appearance column, a flow estimator and a
// motion column stacked on its finest output.
struct TwoStream {
  StreamConfig cfg;
  StreamNet spatial;
  MotionNet motion;
  StreamNet temporal;
};

// The flow estimator keeps its own width scale (it is usually pretrained at
// a different size); resolutions and frame counts must agree.
TwoStream build_two_stream(const StreamConfig& cfg,
                           const MotionNetConfig& motion_cfg, Rng& rng);

struct ClipScores {
  ClassScores spatial;
  ClassScores temporal;
  ClassScores fused;
};

// Scores one clip: spatial stream on the center frame, temporal stream on
// the normalized flows of the full stack, late fusion of the two.
ClipScores classify_clip(const TwoStream& ts, const FrameStack& clip);

struct VideoClassification {
  int label = -1;
  double confidence = 0.0;  // averaged fused probability of `label`
  ClassScores averaged;     // fused scores averaged over sampled clips
  std::vector<ClipScores> clips;
};

// Slides a clip window over `frames` ([1, 3T, H, W], T >= F), starting a
// clip every `sample_period` seconds of wall time at `fps`, scores each and
// averages the fused probabilities. Ties break toward the lowest index.
VideoClassification classify_video(const TwoStream& ts, const Tensor& frames,
                                   double fps, double sample_period);

struct AugmentOptions {
  bool horizontal_flip = true;  // applied with probability 1/2
  bool crop = true;             // one of four corners or the center
  std::vector<double> crop_scales{1.0, 0.875, 0.75};
  int output_resolution = 0;  // 0 keeps the input resolution
};

// Random flip plus corner/multi-scale crop, the same transform for every
// frame. A flip negates the horizontal channels of any attached ground-truth
// flow; a resize rescales the flow values with the geometry.
Clip augment(const Clip& clip, const AugmentOptions& opt, Rng& rng);

enum class OptimizerKind { adam, sgd_momentum };

struct TrainSchedule {
  OptimizerKind optimizer = OptimizerKind::sgd_momentum;
  double lr = 1e-3;
  // Stacked temporal stream only: separate (much smaller) rate for the flow
  // estimator's parameters. Zero freezes the flow estimator.
  double motion_lr = 0.0;
  std::vector<int> decay_steps;  // strictly increasing
  double decay_factor = 0.1;
  int steps = 0;
  int batch_size = 16;
  double momentum = 0.9;
  bool augment_flip = true;
  unsigned long long seed = 0;
};

void validate(const TrainSchedule& s);

// Spatial column schedule: rate cut by 10 at 40% and 80% of the horizon,
// mirroring a 4K/8K decay over a 10K-step run.
TrainSchedule spatial_schedule(int steps, int batch_size);
// Stacked temporal schedule: head at `lr`, flow estimator three orders of
// magnitude lower, both cut by 10 at 5/16 and 10/16 of the horizon.
TrainSchedule temporal_schedule(int steps, int batch_size);

struct StreamTrainResult {
  std::vector<double> spatial_loss;
  std::vector<double> temporal_loss;
};

// Trains the spatial stream on center frames and the stacked temporal
// stream end to end (flow estimator and motion column under their own
// learning rates), both with cross-entropy on the clip labels.
StreamTrainResult train_two_stream(TwoStream& ts,
                                   const std::vector<Clip>& train,
                                   const TrainSchedule& spatial,
                                   const TrainSchedule& temporal);

struct EvalReport {
  double accuracy = 0.0;  // mean over classes of per-class accuracy
  std::vector<double> per_class;
  std::vector<std::vector<long long>> confusion;  // [true][predicted]
  double fps = 0.0;  // frames pushed through the full pipeline per second
  long long clip_count = 0;
  long long frame_count = 0;
};

EvalReport evaluate(const TwoStream& ts, const std::vector<Clip>& clips);

// Wall-clock throughput of classify_clip over the given clips, cycled
// `repeat` times. Labels are ignored; fps counts individual frames.
struct BenchReport {
  double fps = 0.0;
  double seconds = 0.0;
  long long clip_count = 0;
  long long frame_count = 0;
};

BenchReport bench_throughput(const TwoStream& ts,
                             const std::vector<Clip>& clips, int repeat = 1);

}  // namespace actmap
