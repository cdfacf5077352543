#include <algorithm>
#include <cmath>

#include "actmap/common.hpp"
#include "actmap/flow.hpp"
#include "actmap/ops.hpp"

namespace actmap {

FlowField::FlowField(Tensor t) : tensor(std::move(t)) {
  require(tensor.defined() && tensor.ndim() == 4,
          "flow field must be a 4-D tensor");
  require(tensor.dim(1) % 2 == 0,
          "flow field needs an even channel count, got " +
              std::to_string(tensor.dim(1)));
}

FrameStack::FrameStack(Tensor t) : tensor(std::move(t)) {
  require(tensor.defined() && tensor.ndim() == 4,
          "frame stack must be a 4-D tensor");
  require(tensor.dim(1) % 3 == 0 && tensor.dim(1) >= 6,
          "frame stack needs 3F channels with F >= 2, got " +
              std::to_string(tensor.dim(1)));
}

Tensor FrameStack::frame(int t) const {
  require(t >= 0 && t < frames(),
          "frame index " + std::to_string(t) + " outside [0," +
              std::to_string(frames()) + ")");
  return slice_channels(tensor, 3 * t, 3 * t + 3);
}

void validate(const CharbonnierParams& p) {
  require(p.alpha > 0.0 && p.alpha <= 1.0,
          "charbonnier alpha must lie in (0,1]");
  require(p.epsilon >= 0.0, "charbonnier epsilon must be nonnegative");
}

void validate(const SsimParams& p) {
  require(p.window >= 1, "ssim window must be >= 1");
  require(p.c1 > 0.0 && p.c2 > 0.0, "ssim stabilizers must be positive");
}

void validate(const LossWeights& w) {
  require(w.lambda1 >= 0.0 && w.lambda2 >= 0.0 && w.lambda3 >= 0.0,
          "loss weights must be nonnegative");
  require(w.per_scale.size() == 5, "expected 5 per-scale weights, got " +
                                       std::to_string(w.per_scale.size()));
  for (double v : w.per_scale) {
    require(v >= 0.0, "per-scale weights must be nonnegative");
  }
}

Tensor charbonnier(const Tensor& x, const CharbonnierParams& p) {
  validate(p);
  return power(add(mul(x, x), p.epsilon * p.epsilon), p.alpha);
}

Tensor pixel_loss(const Tensor& i1, const Tensor& i2, const Tensor& flow,
                  const CharbonnierParams& p) {
  if (i1.shape() != i2.shape()) {
    fail("pixel_loss: image shapes differ, " + i1.shape_str() + " vs " +
         i2.shape_str());
  }
  return reduce_mean(charbonnier(sub(i1, inverse_warp(i2, flow)), p));
}

Tensor smoothness_loss(const FlowField& flow, const CharbonnierParams& p) {
  // Degenerate 1x1 fields are fine: every padded difference is zero.
  // Averaging the horizontal and vertical penalty maps over all 2K channels
  // counts two of the four per-pair terms each, hence the factor 2 to make
  // the result the per-pair mean of all four.
  Tensor gx = reduce_mean(charbonnier(forward_diff_x(flow.tensor), p));
  Tensor gy = reduce_mean(charbonnier(forward_diff_y(flow.tensor), p));
  return scale(add(gx, gy), 2.0);
}

Tensor ssim_loss(const Tensor& i1, const Tensor& i1_prime,
                 const SsimParams& p) {
  validate(p);
  if (i1.shape() != i1_prime.shape()) {
    fail("ssim_loss: image shapes differ, " + i1.shape_str() + " vs " +
         i1_prime.shape_str());
  }
  require(i1.ndim() == 4, "ssim_loss: images must be 4-D");
  const int k = p.window;
  require(k <= std::min(i1.dim(2), i1.dim(3)),
          "ssim_loss: window " + std::to_string(k) +
              " exceeds image extent " + i1.shape_str());

  Tensor mu1 = avgpool2d(i1, k, 1);
  Tensor mu2 = avgpool2d(i1_prime, k, 1);
  Tensor e11 = avgpool2d(mul(i1, i1), k, 1);
  Tensor e22 = avgpool2d(mul(i1_prime, i1_prime), k, 1);
  Tensor e12 = avgpool2d(mul(i1, i1_prime), k, 1);

  Tensor mu1mu2 = mul(mu1, mu2);
  Tensor var1 = sub(e11, mul(mu1, mu1));
  Tensor var2 = sub(e22, mul(mu2, mu2));
  Tensor cov = sub(e12, mu1mu2);

  Tensor num = mul(add(scale(mu1mu2, 2.0), p.c1),
                   add(scale(cov, 2.0), p.c2));
  Tensor den = mul(add(add(mul(mu1, mu1), mul(mu2, mu2)), p.c1),
                   add(add(var1, var2), p.c2));
  Tensor ssim = div(num, den);
  return reduce_mean(add(scale(ssim, -1.0), 1.0));
}

Tensor composite_loss(const std::vector<FlowField>& flows,
                      const FrameStack& frames, const FlowLossParams& p) {
  validate(p.weights);
  require(flows.size() == 5,
          "composite_loss: expected 5 flow scales, got " +
              std::to_string(flows.size()));
  const int h = frames.height();
  const int w = frames.width();
  require(h % 32 == 0 && w % 32 == 0,
          "composite_loss: frame extent must be divisible by 32, got " +
              frames.tensor.shape_str());
  const int pairs = frames.pairs();

  Tensor total = Tensor::scalar(0.0);
  Tensor pooled = frames.tensor;
  int factor = 1;
  // Walk fine to coarse so each scale reuses the previous pooling stage;
  // flows[] is stored coarsest first.
  std::vector<Tensor> frames_at(5);
  for (int s = 4; s >= 0; --s) {
    pooled = avgpool2d(pooled, 2, 2);
    factor *= 2;
    frames_at[s] = pooled;
    const FlowField& fl = flows[s];
    if (fl.tensor.dim(2) != h / factor || fl.tensor.dim(3) != w / factor) {
      fail("composite_loss: scale " + std::to_string(s) + " flow is " +
           fl.tensor.shape_str() + ", expected spatial " +
           std::to_string(h / factor) + "x" + std::to_string(w / factor));
    }
    require(fl.pairs() == pairs,
            "composite_loss: flow holds " + std::to_string(fl.pairs()) +
                " pairs, frames hold " + std::to_string(pairs));
  }

  for (int s = 0; s < 5; ++s) {
    const double ws = p.weights.per_scale[s];
    if (ws == 0.0) continue;
    const Tensor& fs = frames_at[s];
    const FlowField& fl = flows[s];
    SsimParams ssim_here = p.ssim;
    ssim_here.window =
        std::min(p.ssim.window, std::min(fs.dim(2), fs.dim(3)));

    Tensor pix = Tensor::scalar(0.0);
    Tensor ssim = Tensor::scalar(0.0);
    for (int t = 0; t < pairs; ++t) {
      Tensor i1 = slice_channels(fs, 3 * t, 3 * t + 3);
      Tensor i2 = slice_channels(fs, 3 * t + 3, 3 * t + 6);
      Tensor v = slice_channels(fl.tensor, 2 * t, 2 * t + 2);
      Tensor warped = inverse_warp(i2, v);
      if (p.weights.lambda1 > 0.0) {
        pix = add(pix, reduce_mean(charbonnier(sub(i1, warped), p.pixel)));
      }
      if (p.weights.lambda3 > 0.0) {
        ssim = add(ssim, ssim_loss(i1, warped, ssim_here));
      }
    }
    Tensor scale_sum = Tensor::scalar(0.0);
    if (p.weights.lambda1 > 0.0) {
      scale_sum = add(scale_sum,
                      scale(pix, p.weights.lambda1 / pairs));
    }
    if (p.weights.lambda2 > 0.0) {
      scale_sum = add(scale_sum, scale(smoothness_loss(fl, p.smooth),
                                       p.weights.lambda2));
    }
    if (p.weights.lambda3 > 0.0) {
      scale_sum = add(scale_sum,
                      scale(ssim, p.weights.lambda3 / pairs));
    }
    total = add(total, scale(scale_sum, ws));
  }
  return total;
}

}  // namespace actmap
