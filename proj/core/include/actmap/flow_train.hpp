#pragma once

#include <filesystem>
#include <vector>

#include "actmap/dataset.hpp"
#include "actmap/motionnet.hpp"
#include "actmap/optim.hpp"

namespace actmap {

// [B, 3F, H, W] batch assembled from the chosen clips; all clips must share
// one shape.
Tensor stack_frames(const std::vector<Clip>& clips,
                    const std::vector<size_t>& indices);

// Ground-truth counterpart, [B, 2(F-1), H, W]; every chosen clip must carry
// flow.
Tensor stack_flows(const std::vector<Clip>& clips,
                   const std::vector<size_t>& indices);

struct FlowTrainConfig {
  int steps = 1000;
  int batch_size = 8;
  AdamConfig adam{1e-4, 0.9, 0.999, 1e-8};
  // Halve the learning rate every this many steps; 0 keeps it constant.
  int halve_lr_every = 0;
  // Write a checkpoint every this many steps (0: only the final one) into
  // checkpoint_dir; no checkpoints when the directory is empty.
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  uint64_t seed = 0;
};

struct FlowTrainResult {
  std::vector<double> loss_trace;  // composite loss, one entry per step
};

// Minimizes the multi-scale reconstruction loss over random batches drawn
// with replacement. Throws if the loss leaves the reals, naming the step.
FlowTrainResult train_motionnet(MotionNet& net,
                                const std::vector<Clip>& clips,
                                const FlowTrainConfig& cfg);

// Finest-scale prediction brought to input resolution: upsampled 2x with
// magnitudes doubled so displacements stay in input pixels.
Tensor full_res_flow(const MotionNet& net, const FrameStack& frames);

// Mean endpoint error in input pixels against the clips' stored flow.
double evaluate_epe(const MotionNet& net, const std::vector<Clip>& clips);

}  // namespace actmap
