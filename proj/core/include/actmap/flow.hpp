#pragma once

#include <vector>

#include "actmap/tensor.hpp"

namespace actmap {

// Largest displacement magnitude the pipeline represents: flows are clipped
// to [-kFlowCap, kFlowCap] px before normalization, and generated clips may
// not move faster than this.
inline constexpr double kFlowCap = 20.0;

// K per-pair flows stacked as [N, 2K, H, W]; within each pair, channel 0
// displaces the horizontal (column) axis and channel 1 the vertical axis,
// in pixels at the field's own resolution.
struct FlowField {
  Tensor tensor;

  explicit FlowField(Tensor t);
  int pairs() const { return tensor.dim(1) / 2; }
  int height() const { return tensor.dim(2); }
  int width() const { return tensor.dim(3); }
};

// F consecutive RGB frames stacked as [N, 3F, H, W], values in [0,1].
struct FrameStack {
  Tensor tensor;

  explicit FrameStack(Tensor t);
  int frames() const { return tensor.dim(1) / 3; }
  int pairs() const { return frames() - 1; }
  int height() const { return tensor.dim(2); }
  int width() const { return tensor.dim(3); }
  // Channels [3t, 3t+3) as an [N,3,H,W] view copy.
  Tensor frame(int t) const;
};

// rho(x) = (x^2 + epsilon^2)^alpha
struct CharbonnierParams {
  double alpha = 0.4;
  double epsilon = 1e-3;
};

struct SsimParams {
  int window = 8;
  double c1 = 1e-4;  // (0.01 * L)^2 for unit dynamic range
  double c2 = 9e-4;  // (0.03 * L)^2
};

struct LossWeights {
  double lambda1 = 1.0;  // pixel reconstruction
  double lambda2 = 1.0;  // smoothness
  double lambda3 = 1.0;  // structural similarity
  // One weight per scale, coarsest (H/32) first, finest (H/2) last.
  std::vector<double> per_scale{0.005, 0.01, 0.02, 0.08, 0.32};
};

struct FlowLossParams {
  CharbonnierParams pixel{0.4, 1e-3};
  CharbonnierParams smooth{0.3, 1e-3};
  SsimParams ssim;
  LossWeights weights;
};

// Elementwise generalized Charbonnier penalty.
Tensor charbonnier(const Tensor& x, const CharbonnierParams& p);

// out(i,j) = bilinear sample of image at (j + Vx(i,j), i + Vy(i,j)),
// clamped to the border; differentiable in both image and flow.
Tensor inverse_warp(const Tensor& image, const Tensor& flow);

// Mean Charbonnier residual between I1 and I2 warped towards it by one
// flow pair.
Tensor pixel_loss(const Tensor& i1, const Tensor& i2, const Tensor& flow,
                  const CharbonnierParams& p);

// Mean over pixels of the four penalized forward differences, averaged
// across flow pairs.
Tensor smoothness_loss(const FlowField& flow, const CharbonnierParams& p);

// Mean of (1 - SSIM) over all valid windows; in [0, 2].
Tensor ssim_loss(const Tensor& i1, const Tensor& i1_prime,
                 const SsimParams& p);

// Weighted multi-scale sum of the three losses. flows holds the 5 scales
// coarsest first (H/32 .. H/2); frames are average-pooled to each scale.
Tensor composite_loss(const std::vector<FlowField>& flows,
                      const FrameStack& frames, const FlowLossParams& p);

void validate(const CharbonnierParams& p);
void validate(const SsimParams& p);
void validate(const LossWeights& w);

}  // namespace actmap
