#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "actmap/autograd.hpp"
#include "actmap/ops.hpp"
#include "actmap/streams.hpp"

namespace actmap {

void validate(const TrainSchedule& s) {
  require(s.lr > 0.0, "streams: learning rate must be positive");
  require(s.motion_lr >= 0.0,
          "streams: flow-estimator learning rate must be nonnegative");
  require(s.decay_factor > 0.0 && s.decay_factor <= 1.0,
          "streams: decay factor must lie in (0,1]");
  require(s.steps >= 0, "streams: step count must be nonnegative");
  require(s.batch_size >= 1, "streams: batch size must be positive");
  require(s.momentum >= 0.0 && s.momentum < 1.0,
          "streams: momentum must lie in [0,1)");
  for (size_t i = 0; i < s.decay_steps.size(); ++i) {
    require(s.decay_steps[i] > 0 &&
                (i == 0 || s.decay_steps[i] > s.decay_steps[i - 1]),
            "streams: decay steps must be positive and strictly increasing");
  }
}

TrainSchedule spatial_schedule(int steps, int batch_size) {
  TrainSchedule s;
  s.lr = 1e-3;
  s.steps = steps;
  s.batch_size = batch_size;
  const int d1 = (steps * 2) / 5;
  const int d2 = (steps * 4) / 5;
  if (d1 > 0) s.decay_steps.push_back(d1);
  if (d2 > d1) s.decay_steps.push_back(d2);
  return s;
}

TrainSchedule temporal_schedule(int steps, int batch_size) {
  TrainSchedule s;
  s.lr = 1e-3;
  s.motion_lr = 1e-6;
  s.steps = steps;
  s.batch_size = batch_size;
  const int d1 = (steps * 5) / 16;
  const int d2 = (steps * 10) / 16;
  if (d1 > 0) s.decay_steps.push_back(d1);
  if (d2 > d1) s.decay_steps.push_back(d2);
  return s;
}

namespace {

class Optimizer {
 public:
  Optimizer(ParamList& params, const TrainSchedule& s, double lr) {
    if (s.optimizer == OptimizerKind::adam) {
      adam_.emplace(params, AdamConfig{lr, 0.9, 0.999, 1e-8});
    } else {
      sgd_.emplace(params, SgdConfig{lr, s.momentum});
    }
  }

  void set_lr(double lr) {
    if (adam_) adam_->set_lr(lr);
    else sgd_->set_lr(lr);
  }
  void step() {
    if (adam_) adam_->step();
    else sgd_->step();
  }

 private:
  std::optional<Adam> adam_;
  std::optional<SgdMomentum> sgd_;
};

StepDecay decay_of(const TrainSchedule& s, double base_lr) {
  StepDecay d{base_lr, s.decay_factor, {}};
  d.boundaries.assign(s.decay_steps.begin(), s.decay_steps.end());
  return d;
}

// Copies channels [ch0, ch0+nch) of a [C,H,W] clip into dst, optionally
// mirroring every row.
void copy_channels(const Clip& clip, int ch0, int nch, double* dst,
                   bool flip) {
  const int h = clip.height();
  const int w = clip.width();
  const double* src =
      clip.frames.data().data() + static_cast<size_t>(ch0) * h * w;
  if (!flip) {
    std::copy_n(src, static_cast<size_t>(nch) * h * w, dst);
    return;
  }
  for (int c = 0; c < nch; ++c) {
    for (int i = 0; i < h; ++i) {
      const double* row = src + (static_cast<size_t>(c) * h + i) * w;
      double* out = dst + (static_cast<size_t>(c) * h + i) * w;
      std::reverse_copy(row, row + w, out);
    }
  }
}

void check_training_clips(const std::vector<Clip>& train,
                          const StreamConfig& cfg) {
  require(!train.empty(), "streams: empty training set");
  for (const Clip& c : train) {
    require(c.label >= 0 && c.label < cfg.class_count,
            "streams: clip '" + c.id + "' has label " +
                std::to_string(c.label) + ", expected [0," +
                std::to_string(cfg.class_count) + ")");
    require(c.frames.defined() && c.frames.ndim() == 3 &&
                c.frames.dim(0) == 3 * cfg.frame_count &&
                c.frames.dim(1) == cfg.input_resolution &&
                c.frames.dim(2) == cfg.input_resolution,
            "streams: clip '" + c.id + "' does not match the configured " +
                std::to_string(3 * cfg.frame_count) + "x" +
                std::to_string(cfg.input_resolution) + "x" +
                std::to_string(cfg.input_resolution));
  }
}

double checked_loss(const Tensor& loss, int step) {
  const double v = loss.item();
  if (!std::isfinite(v)) {
    fail("training diverged: loss " + std::to_string(v) + " at step " +
         std::to_string(step));
  }
  return v;
}

}  // namespace

StreamTrainResult train_two_stream(TwoStream& ts,
                                   const std::vector<Clip>& train,
                                   const TrainSchedule& spatial,
                                   const TrainSchedule& temporal) {
  validate(spatial);
  validate(temporal);
  check_training_clips(train, ts.cfg);

  const int r = ts.cfg.input_resolution;
  const int f = ts.cfg.frame_count;
  const int last = static_cast<int>(train.size()) - 1;
  StreamTrainResult result;

  {
    Rng rng(spatial.seed);
    Optimizer opt(ts.spatial.params(), spatial, spatial.lr);
    const StepDecay decay = decay_of(spatial, spatial.lr);
    const int center = 3 * (f / 2);
    for (int step = 0; step < spatial.steps; ++step) {
      opt.set_lr(decay.at(step));
      Tensor batch({spatial.batch_size, 3, r, r});
      std::vector<int> labels(static_cast<size_t>(spatial.batch_size));
      for (int b = 0; b < spatial.batch_size; ++b) {
        const Clip& clip = train[static_cast<size_t>(uniform_int(rng, 0, last))];
        const bool flip = spatial.augment_flip && uniform01(rng) < 0.5;
        copy_channels(clip, center, 3,
                      batch.data().data() + static_cast<size_t>(b) * 3 * r * r,
                      flip);
        labels[static_cast<size_t>(b)] = clip.label;
      }
      Tensor loss =
          softmax_cross_entropy(ts.spatial.logits(batch, &rng), labels);
      result.spatial_loss.push_back(checked_loss(loss, step));
      zero_grads(ts.spatial.params());
      backward(loss);
      opt.step();
    }
  }

  {
    Rng rng(temporal.seed);
    Optimizer head(ts.temporal.params(), temporal, temporal.lr);
    const StepDecay head_decay = decay_of(temporal, temporal.lr);
    std::optional<Optimizer> motion;
    std::optional<StepDecay> motion_decay;
    if (temporal.motion_lr > 0.0) {
      motion.emplace(ts.motion.params(), temporal, temporal.motion_lr);
      motion_decay = decay_of(temporal, temporal.motion_lr);
    }
    for (int step = 0; step < temporal.steps; ++step) {
      head.set_lr(head_decay.at(step));
      if (motion) motion->set_lr(motion_decay->at(step));
      Tensor batch({temporal.batch_size, 3 * f, r, r});
      std::vector<int> labels(static_cast<size_t>(temporal.batch_size));
      for (int b = 0; b < temporal.batch_size; ++b) {
        const Clip& clip = train[static_cast<size_t>(uniform_int(rng, 0, last))];
        const bool flip = temporal.augment_flip && uniform01(rng) < 0.5;
        copy_channels(
            clip, 0, 3 * f,
            batch.data().data() + static_cast<size_t>(b) * 3 * f * r * r,
            flip);
        labels[static_cast<size_t>(b)] = clip.label;
      }
      std::vector<FlowField> flows = ts.motion.predict_flows(FrameStack(batch));
      Tensor normalized = flow_normalize(flows.back().tensor, ts.cfg.flow_cap);
      if (!motion) normalized = normalized.detach();
      Tensor loss =
          softmax_cross_entropy(ts.temporal.logits(normalized, &rng), labels);
      result.temporal_loss.push_back(checked_loss(loss, step));
      zero_grads(ts.temporal.params());
      zero_grads(ts.motion.params());
      backward(loss);
      head.step();
      if (motion) motion->step();
    }
  }

  return result;
}

}  // namespace actmap
