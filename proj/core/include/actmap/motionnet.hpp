#pragma once

#include <string>
#include <vector>

#include "actmap/common.hpp"
#include "actmap/flow.hpp"
#include "actmap/optim.hpp"
#include "actmap/tensor.hpp"

namespace actmap {

struct MotionNetConfig {
  // Multiplies every internal channel count, rounded up; flow heads keep
  // their 2(F-1) channels.
  double width_scale = 1.0;
  int frame_count = 11;
  int height = 224;
  int width = 224;
  FlowLossParams loss;

  int pairs() const { return frame_count - 1; }
  int flow_channels() const { return 2 * (frame_count - 1); }
};

void validate(const MotionNetConfig& cfg);

// Encoder-decoder flow estimator: six stride-2 encoder stages with paired
// 3x3 refinements, then four deconv stages, each concatenating the deconv
// output, the upsampled coarser flow (values doubled to stay in pixels of
// the finer grid) and the matching encoder feature. Flow heads at five
// scales, coarsest H/32 to finest H/2.
class MotionNet {
 public:
  MotionNet(const MotionNetConfig& cfg, Rng& rng);

  // Returns the five flow fields, coarsest first.
  std::vector<FlowField> predict_flows(const FrameStack& frames) const;

  const MotionNetConfig& config() const { return cfg_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

  // Zeroes the five flow-head weight/bias tensors, making every predicted
  // flow identically zero.
  void zero_flow_heads();

 private:
  Tensor param(const std::string& name) const;

  MotionNetConfig cfg_;
  ParamList params_;
};

MotionNet build_motionnet(const MotionNetConfig& cfg, Rng& rng);

}  // namespace actmap
