#include <algorithm>
#include <cmath>
#include <vector>

#include "actmap/autograd.hpp"
#include "actmap/common.hpp"
#include "actmap/flow.hpp"
#include "actmap/ops.hpp"

namespace actmap {
namespace {

struct SampleAxis {
  int lo = 0;
  int hi = 0;
  double t = 0.0;
  // 0 when the raw coordinate left the image; the clamped sample then no
  // longer responds to the flow.
  double slope = 1.0;
};

SampleAxis resolve_axis(double coord, int n) {
  SampleAxis a;
  if (std::isnan(coord)) {
    // Keep the indices safe and let the NaN flow through the interpolation
    // weights, so a diverged flow surfaces as a NaN loss instead of UB.
    a.lo = a.hi = 0;
    a.t = coord;
    a.slope = 0.0;
    return a;
  }
  if (coord <= 0.0) {
    a.lo = a.hi = 0;
    a.t = 0.0;
    a.slope = coord < 0.0 ? 0.0 : 1.0;
    return a;
  }
  if (coord >= n - 1) {
    a.lo = a.hi = n - 1;
    a.t = 0.0;
    a.slope = coord > n - 1 ? 0.0 : 1.0;
    return a;
  }
  const double f = std::floor(coord);
  a.lo = static_cast<int>(f);
  a.hi = a.lo + 1;
  a.t = coord - f;
  return a;
}

class InverseWarpNode : public Node {
 public:
  void backward(std::span<const double> g) override {
    TensorImpl* img = inputs_[0].get();
    TensorImpl* flow = inputs_[1].get();
    const int n = img->shape[0];
    const int c = img->shape[1];
    const int h = img->shape[2];
    const int w = img->shape[3];
    const int64_t plane = static_cast<int64_t>(h) * w;

    std::vector<double> dimg;
    std::vector<double> dflow;
    if (img->requires_grad) dimg.assign(img->numel(), 0.0);
    if (flow->requires_grad) dflow.assign(flow->numel(), 0.0);
    if (dimg.empty() && dflow.empty()) return;

    for (int b = 0; b < n; ++b) {
      const double* vx = flow->data.data() +
                         (static_cast<int64_t>(b) * 2 + 0) * plane;
      const double* vy = flow->data.data() +
                         (static_cast<int64_t>(b) * 2 + 1) * plane;
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const int64_t px = static_cast<int64_t>(i) * w + j;
          const SampleAxis ax = resolve_axis(j + vx[px], w);
          const SampleAxis ay = resolve_axis(i + vy[px], h);
          double gx = 0.0;
          double gy = 0.0;
          for (int ch = 0; ch < c; ++ch) {
            const int64_t base = (static_cast<int64_t>(b) * c + ch) * plane;
            const double gv =
                g[(static_cast<int64_t>(b) * c + ch) * plane + px];
            if (gv == 0.0) continue;
            const int64_t i00 = base + static_cast<int64_t>(ay.lo) * w + ax.lo;
            const int64_t i01 = base + static_cast<int64_t>(ay.lo) * w + ax.hi;
            const int64_t i10 = base + static_cast<int64_t>(ay.hi) * w + ax.lo;
            const int64_t i11 = base + static_cast<int64_t>(ay.hi) * w + ax.hi;
            if (!dimg.empty()) {
              dimg[i00] += (1 - ay.t) * (1 - ax.t) * gv;
              dimg[i01] += (1 - ay.t) * ax.t * gv;
              dimg[i10] += ay.t * (1 - ax.t) * gv;
              dimg[i11] += ay.t * ax.t * gv;
            }
            if (!dflow.empty()) {
              const double* d = img->data.data();
              gx += gv * ((1 - ay.t) * (d[i01] - d[i00]) +
                          ay.t * (d[i11] - d[i10]));
              gy += gv * ((1 - ax.t) * (d[i10] - d[i00]) +
                          ax.t * (d[i11] - d[i01]));
            }
          }
          if (!dflow.empty()) {
            dflow[(static_cast<int64_t>(b) * 2 + 0) * plane + px] +=
                gx * ax.slope;
            dflow[(static_cast<int64_t>(b) * 2 + 1) * plane + px] +=
                gy * ay.slope;
          }
        }
      }
    }
    if (!dimg.empty()) img->accumulate_grad(dimg);
    if (!dflow.empty()) flow->accumulate_grad(dflow);
  }

  const char* kind() const override { return "inverse_warp"; }
};

}  // namespace

Tensor inverse_warp(const Tensor& image, const Tensor& flow) {
  require(image.ndim() == 4, "inverse_warp: image must be 4-D, got " +
                                 image.shape_str());
  require(flow.ndim() == 4 && flow.dim(1) == 2,
          "inverse_warp: flow must be [N,2,H,W], got " + flow.shape_str());
  if (flow.dim(0) != image.dim(0) || flow.dim(2) != image.dim(2) ||
      flow.dim(3) != image.dim(3)) {
    fail("inverse_warp: flow " + flow.shape_str() + " does not match image " +
         image.shape_str());
  }
  const int n = image.dim(0);
  const int c = image.dim(1);
  const int h = image.dim(2);
  const int w = image.dim(3);
  const int64_t plane = static_cast<int64_t>(h) * w;

  Tensor out = Tensor::zeros(image.shape());
  std::span<const double> img = image.data();
  std::span<const double> fl = flow.data();
  std::span<double> y = out.data();
  for (int b = 0; b < n; ++b) {
    const double* vx = fl.data() + (static_cast<int64_t>(b) * 2 + 0) * plane;
    const double* vy = fl.data() + (static_cast<int64_t>(b) * 2 + 1) * plane;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const int64_t px = static_cast<int64_t>(i) * w + j;
        const SampleAxis ax = resolve_axis(j + vx[px], w);
        const SampleAxis ay = resolve_axis(i + vy[px], h);
        for (int ch = 0; ch < c; ++ch) {
          const double* d =
              img.data() + (static_cast<int64_t>(b) * c + ch) * plane;
          const double top = (1 - ax.t) * d[ay.lo * w + ax.lo] +
                             ax.t * d[ay.lo * w + ax.hi];
          const double bot = (1 - ax.t) * d[ay.hi * w + ax.lo] +
                             ax.t * d[ay.hi * w + ax.hi];
          y[(static_cast<int64_t>(b) * c + ch) * plane + px] =
              (1 - ay.t) * top + ay.t * bot;
        }
      }
    }
  }
  return attach_node(std::move(out), std::make_shared<InverseWarpNode>(),
                     {image, flow});
}

}  // namespace actmap
