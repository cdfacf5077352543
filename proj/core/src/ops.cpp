#include "actmap/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "actmap/common.hpp"

namespace actmap {
namespace {

int64_t ceil_div(int64_t a, int64_t b) {
  return a > 0 ? (a + b - 1) / b : a / b;
}

int64_t floor_div(int64_t a, int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

Tensor make_output(std::vector<int> shape, std::shared_ptr<Node> node,
                   const std::vector<Tensor>& inputs) {
  Tensor out = Tensor::zeros(std::move(shape));
  return attach_node(std::move(out), std::move(node), inputs);
}

void check_same_or_scalar(const Tensor& a, const Tensor& b, const char* op) {
  if (a.numel() == 1 || b.numel() == 1) return;
  if (a.shape() != b.shape()) {
    fail(std::string(op) + ": shapes differ, " + a.shape_str() + " vs " +
         b.shape_str());
  }
}

// y_i = f(a_bcast(i), b_bcast(i)); either side may be a broadcast scalar.
class BinaryNode : public Node {
 public:
  enum Kind { kAdd, kSub, kMul, kDiv };

  explicit BinaryNode(Kind kind) : kind_(kind) {}

  void backward(std::span<const double> g) override {
    TensorImpl* a = inputs_[0].get();
    TensorImpl* b = inputs_[1].get();
    const int64_t n = static_cast<int64_t>(g.size());
    const bool a_scalar = a->numel() == 1;
    const bool b_scalar = b->numel() == 1;
    std::vector<double> da(a->numel(), 0.0);
    std::vector<double> db(b->numel(), 0.0);
    for (int64_t i = 0; i < n; ++i) {
      const double av = a->data[a_scalar ? 0 : i];
      const double bv = b->data[b_scalar ? 0 : i];
      double ga = 0.0;
      double gb = 0.0;
      switch (kind_) {
        case kAdd:
          ga = g[i];
          gb = g[i];
          break;
        case kSub:
          ga = g[i];
          gb = -g[i];
          break;
        case kMul:
          ga = g[i] * bv;
          gb = g[i] * av;
          break;
        case kDiv:
          ga = g[i] / bv;
          gb = -g[i] * av / (bv * bv);
          break;
      }
      da[a_scalar ? 0 : i] += ga;
      db[b_scalar ? 0 : i] += gb;
    }
    if (a->requires_grad) a->accumulate_grad(da);
    if (b->requires_grad) b->accumulate_grad(db);
  }

  const char* kind() const override {
    switch (kind_) {
      case kAdd: return "add";
      case kSub: return "sub";
      case kMul: return "mul";
      case kDiv: return "div";
    }
    return "binary";
  }

 private:
  Kind kind_;
};

Tensor binary_op(const Tensor& a, const Tensor& b, BinaryNode::Kind kind,
                 const char* name) {
  check_same_or_scalar(a, b, name);
  const bool a_scalar = a.numel() == 1;
  const Tensor& big = a_scalar && b.numel() != 1 ? b : a;
  Tensor out = make_output(big.shape(), std::make_shared<BinaryNode>(kind),
                           {a, b});
  std::span<const double> av = a.data();
  std::span<const double> bv = b.data();
  std::span<double> y = out.data();
  const bool bs = b.numel() == 1;
  const bool as = a.numel() == 1;
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double x0 = av[as ? 0 : i];
    const double x1 = bv[bs ? 0 : i];
    switch (kind) {
      case BinaryNode::kAdd: y[i] = x0 + x1; break;
      case BinaryNode::kSub: y[i] = x0 - x1; break;
      case BinaryNode::kMul: y[i] = x0 * x1; break;
      case BinaryNode::kDiv: y[i] = x0 / x1; break;
    }
  }
  return out;
}

// y = a*x + b with scalar a, b; covers scale() and add-constant.
class AffineNode : public Node {
 public:
  explicit AffineNode(double a) : a_(a) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    std::vector<double> dx(g.size());
    for (size_t i = 0; i < g.size(); ++i) dx[i] = a_ * g[i];
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "affine"; }

 private:
  double a_;
};

class ReluNode : public Node {
 public:
  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    std::vector<double> dx(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
      dx[i] = x->data[i] > 0.0 ? g[i] : 0.0;
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "relu"; }
};

class PowerNode : public Node {
 public:
  explicit PowerNode(double alpha) : alpha_(alpha) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    std::vector<double> dx(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
      dx[i] = g[i] * alpha_ * std::pow(x->data[i], alpha_ - 1.0);
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "power"; }

 private:
  double alpha_;
};

class ClampNode : public Node {
 public:
  ClampNode(double lo, double hi) : lo_(lo), hi_(hi) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    std::vector<double> dx(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
      const double v = x->data[i];
      dx[i] = (v > lo_ && v < hi_) ? g[i] : 0.0;
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "clamp"; }

 private:
  double lo_;
  double hi_;
};

class ReduceMeanNode : public Node {
 public:
  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    const double w = g[0] / static_cast<double>(x->numel());
    std::vector<double> dx(x->numel(), w);
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "reduce_mean"; }
};

class ReshapeNode : public Node {
 public:
  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    x->accumulate_grad(g);
  }

  const char* kind() const override { return "reshape"; }
};

class ConcatChannelsNode : public Node {
 public:
  void backward(std::span<const double> g) override {
    const int n = inputs_[0]->shape[0];
    const int h = inputs_[0]->shape[2];
    const int w = inputs_[0]->shape[3];
    const int64_t plane = static_cast<int64_t>(h) * w;
    int c_total = 0;
    for (const auto& in : inputs_) c_total += in->shape[1];
    int c_base = 0;
    for (const auto& in : inputs_) {
      const int ci = in->shape[1];
      if (in->requires_grad) {
        std::vector<double> dx(in->numel());
        for (int b = 0; b < n; ++b) {
          const double* src =
              g.data() + (static_cast<int64_t>(b) * c_total + c_base) * plane;
          double* dst = dx.data() + static_cast<int64_t>(b) * ci * plane;
          std::copy(src, src + static_cast<int64_t>(ci) * plane, dst);
        }
        in->accumulate_grad(dx);
      }
      c_base += ci;
    }
  }

  const char* kind() const override { return "concat_channels"; }
};

class SliceChannelsNode : public Node {
 public:
  SliceChannelsNode(int c0, int c1) : c0_(c0), c1_(c1) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    const int n = x->shape[0];
    const int c = x->shape[1];
    const int64_t plane = static_cast<int64_t>(x->shape[2]) * x->shape[3];
    const int cs = c1_ - c0_;
    std::vector<double> dx(x->numel(), 0.0);
    for (int b = 0; b < n; ++b) {
      const double* src = g.data() + static_cast<int64_t>(b) * cs * plane;
      double* dst =
          dx.data() + (static_cast<int64_t>(b) * c + c0_) * plane;
      std::copy(src, src + static_cast<int64_t>(cs) * plane, dst);
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "slice_channels"; }

 private:
  int c0_;
  int c1_;
};

struct ConvDims {
  int n, ci, h, w, co, kh, kw, oh, ow, stride, pad;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weight, int stride,
                   int pad) {
  require(input.ndim() == 4, "conv2d: input must be 4-D, got " +
                                 input.shape_str());
  require(weight.ndim() == 4, "conv2d: weight must be 4-D, got " +
                                  weight.shape_str());
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(pad >= 0, "conv2d: pad must be >= 0");
  ConvDims d;
  d.n = input.dim(0);
  d.ci = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.co = weight.dim(0);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  d.stride = stride;
  d.pad = pad;
  if (weight.dim(1) != d.ci) {
    fail("conv2d: weight expects " + std::to_string(weight.dim(1)) +
         " input channels, input has " + std::to_string(d.ci));
  }
  const int eff_h = d.h + 2 * pad;
  const int eff_w = d.w + 2 * pad;
  if (eff_h < d.kh || eff_w < d.kw) {
    fail("conv2d: kernel " + std::to_string(d.kh) + "x" +
         std::to_string(d.kw) + " larger than padded input " +
         std::to_string(eff_h) + "x" + std::to_string(eff_w));
  }
  d.oh = (eff_h - d.kh) / stride + 1;
  d.ow = (eff_w - d.kw) / stride + 1;
  return d;
}

class Conv2dNode : public Node {
 public:
  explicit Conv2dNode(ConvDims d) : d_(d) {}

  void backward(std::span<const double> g) override {
    TensorImpl* in = inputs_[0].get();
    TensorImpl* w = inputs_[1].get();
    TensorImpl* b = inputs_[2].get();
    const ConvDims& d = d_;
    const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
    const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;

    if (b->requires_grad) {
      std::vector<double> db(d.co, 0.0);
      for (int n = 0; n < d.n; ++n) {
        for (int k = 0; k < d.co; ++k) {
          const double* gp = g.data() + (static_cast<int64_t>(n) * d.co + k) *
                                            out_plane;
          double s = 0.0;
          for (int64_t i = 0; i < out_plane; ++i) s += gp[i];
          db[k] += s;
        }
      }
      b->accumulate_grad(db);
    }

    std::vector<double> din;
    std::vector<double> dw;
    if (in->requires_grad) din.assign(in->numel(), 0.0);
    if (w->requires_grad) dw.assign(w->numel(), 0.0);
    if (din.empty() && dw.empty()) return;

    for (int n = 0; n < d.n; ++n) {
      for (int k = 0; k < d.co; ++k) {
        const double* gp =
            g.data() + (static_cast<int64_t>(n) * d.co + k) * out_plane;
        for (int c = 0; c < d.ci; ++c) {
          const int64_t in_base = (static_cast<int64_t>(n) * d.ci + c) *
                                  in_plane;
          const int64_t w_base =
              (static_cast<int64_t>(k) * d.ci + c) * d.kh * d.kw;
          for (int r = 0; r < d.kh; ++r) {
            for (int q = 0; q < d.kw; ++q) {
              const int64_t oj_lo =
                  std::max<int64_t>(0, ceil_div(d.pad - q, d.stride));
              const int64_t oj_hi = std::min<int64_t>(
                  d.ow - 1, floor_div(d.w - 1 + d.pad - q, d.stride));
              if (oj_lo > oj_hi) continue;
              const double wv = w->data[w_base + r * d.kw + q];
              double wacc = 0.0;
              for (int oi = 0; oi < d.oh; ++oi) {
                const int ii = oi * d.stride - d.pad + r;
                if (ii < 0 || ii >= d.h) continue;
                const double* grow = gp + static_cast<int64_t>(oi) * d.ow;
                const int64_t row = in_base + static_cast<int64_t>(ii) * d.w;
                for (int64_t oj = oj_lo; oj <= oj_hi; ++oj) {
                  const int64_t ij = oj * d.stride - d.pad + q;
                  if (!din.empty()) din[row + ij] += wv * grow[oj];
                  if (!dw.empty()) wacc += in->data[row + ij] * grow[oj];
                }
              }
              if (!dw.empty()) dw[w_base + r * d.kw + q] += wacc;
            }
          }
        }
      }
    }
    if (!din.empty()) in->accumulate_grad(din);
    if (!dw.empty()) w->accumulate_grad(dw);
  }

  const char* kind() const override { return "conv2d"; }

 private:
  ConvDims d_;
};

class Deconv2dNode : public Node {
 public:
  Deconv2dNode(int n, int ci, int h, int w, int co)
      : n_(n), ci_(ci), h_(h), w_(w), co_(co) {}

  void backward(std::span<const double> g) override {
    TensorImpl* in = inputs_[0].get();
    TensorImpl* w = inputs_[1].get();
    const int oh = 2 * h_;
    const int ow = 2 * w_;
    const int64_t out_plane = static_cast<int64_t>(oh) * ow;
    const int64_t in_plane = static_cast<int64_t>(h_) * w_;

    std::vector<double> din;
    std::vector<double> dw;
    if (in->requires_grad) din.assign(in->numel(), 0.0);
    if (w->requires_grad) dw.assign(w->numel(), 0.0);
    if (din.empty() && dw.empty()) return;

    for (int n = 0; n < n_; ++n) {
      for (int c = 0; c < ci_; ++c) {
        const int64_t in_base = (static_cast<int64_t>(n) * ci_ + c) * in_plane;
        for (int k = 0; k < co_; ++k) {
          const double* gp =
              g.data() + (static_cast<int64_t>(n) * co_ + k) * out_plane;
          const int64_t w_base = (static_cast<int64_t>(c) * co_ + k) * 16;
          for (int r = 0; r < 4; ++r) {
            for (int q = 0; q < 4; ++q) {
              const double wv = w->data[w_base + r * 4 + q];
              double wacc = 0.0;
              for (int i = 0; i < h_; ++i) {
                const int oi = 2 * i + r - 1;
                if (oi < 0 || oi >= oh) continue;
                const int64_t in_row = in_base + static_cast<int64_t>(i) * w_;
                const double* grow = gp + static_cast<int64_t>(oi) * ow;
                for (int j = 0; j < w_; ++j) {
                  const int oj = 2 * j + q - 1;
                  if (oj < 0 || oj >= ow) continue;
                  const double gv = grow[oj];
                  if (!din.empty()) din[in_row + j] += wv * gv;
                  if (!dw.empty()) wacc += in->data[in_row + j] * gv;
                }
              }
              if (!dw.empty()) dw[w_base + r * 4 + q] += wacc;
            }
          }
        }
      }
    }
    if (!din.empty()) in->accumulate_grad(din);
    if (!dw.empty()) w->accumulate_grad(dw);
  }

  const char* kind() const override { return "deconv2d"; }

 private:
  int n_, ci_, h_, w_, co_;
};

class MaxPool2dNode : public Node {
 public:
  explicit MaxPool2dNode(std::vector<int64_t> argmax)
      : argmax_(std::move(argmax)) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    std::vector<double> dx(x->numel(), 0.0);
    for (size_t i = 0; i < g.size(); ++i) dx[argmax_[i]] += g[i];
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "maxpool2d"; }

 private:
  std::vector<int64_t> argmax_;
};

class AvgPool2dNode : public Node {
 public:
  AvgPool2dNode(int k, int stride) : k_(k), stride_(stride) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    const int n = x->shape[0];
    const int c = x->shape[1];
    const int h = x->shape[2];
    const int w = x->shape[3];
    const int oh = (h - k_) / stride_ + 1;
    const int ow = (w - k_) / stride_ + 1;
    const double inv = 1.0 / (static_cast<double>(k_) * k_);
    std::vector<double> dx(x->numel(), 0.0);
    int64_t o = 0;
    for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
      const int64_t base = p * h * w;
      for (int oi = 0; oi < oh; ++oi) {
        for (int oj = 0; oj < ow; ++oj, ++o) {
          const double gv = g[o] * inv;
          for (int r = 0; r < k_; ++r) {
            double* row = dx.data() + base +
                          static_cast<int64_t>(oi * stride_ + r) * w +
                          oj * stride_;
            for (int q = 0; q < k_; ++q) row[q] += gv;
          }
        }
      }
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "avgpool2d"; }

 private:
  int k_;
  int stride_;
};

struct Axis2x {
  std::vector<int> lo, hi;
  std::vector<double> t;
};

Axis2x upsample_axis(int n) {
  Axis2x a;
  a.lo.resize(2 * n);
  a.hi.resize(2 * n);
  a.t.resize(2 * n);
  for (int o = 0; o < 2 * n; ++o) {
    const double src = (o + 0.5) / 2.0 - 0.5;
    const double f = std::floor(src);
    const int i0 = static_cast<int>(f);
    a.lo[o] = std::clamp(i0, 0, n - 1);
    a.hi[o] = std::clamp(i0 + 1, 0, n - 1);
    a.t[o] = src - f;
  }
  return a;
}

class Upsample2xNode : public Node {
 public:
  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    const int h = x->shape[2];
    const int w = x->shape[3];
    const Axis2x ay = upsample_axis(h);
    const Axis2x ax = upsample_axis(w);
    const int64_t planes = static_cast<int64_t>(x->shape[0]) * x->shape[1];
    std::vector<double> dx(x->numel(), 0.0);
    int64_t o = 0;
    for (int64_t p = 0; p < planes; ++p) {
      double* dst = dx.data() + p * h * w;
      for (int oi = 0; oi < 2 * h; ++oi) {
        const double ty = ay.t[oi];
        const int64_t r0 = static_cast<int64_t>(ay.lo[oi]) * w;
        const int64_t r1 = static_cast<int64_t>(ay.hi[oi]) * w;
        for (int oj = 0; oj < 2 * w; ++oj, ++o) {
          const double tx = ax.t[oj];
          const double gv = g[o];
          dst[r0 + ax.lo[oj]] += (1 - ty) * (1 - tx) * gv;
          dst[r0 + ax.hi[oj]] += (1 - ty) * tx * gv;
          dst[r1 + ax.lo[oj]] += ty * (1 - tx) * gv;
          dst[r1 + ax.hi[oj]] += ty * tx * gv;
        }
      }
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "upsample2x"; }
};

// y(.,j) = x(.,j+1) - x(.,j) with a zero final column (horizontal == true),
// or the same along rows. Gradient is the negated backward difference.
class ForwardDiffNode : public Node {
 public:
  explicit ForwardDiffNode(bool horizontal) : horizontal_(horizontal) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    const int h = x->shape[2];
    const int w = x->shape[3];
    const int64_t planes = static_cast<int64_t>(x->shape[0]) * x->shape[1];
    std::vector<double> dx(x->numel(), 0.0);
    for (int64_t p = 0; p < planes; ++p) {
      const double* gp = g.data() + p * h * w;
      double* dp = dx.data() + p * h * w;
      if (horizontal_) {
        for (int i = 0; i < h; ++i) {
          for (int j = 0; j < w; ++j) {
            const int64_t idx = static_cast<int64_t>(i) * w + j;
            if (j < w - 1) dp[idx] -= gp[idx];
            if (j > 0) dp[idx] += gp[idx - 1];
          }
        }
      } else {
        for (int i = 0; i < h; ++i) {
          for (int j = 0; j < w; ++j) {
            const int64_t idx = static_cast<int64_t>(i) * w + j;
            if (i < h - 1) dp[idx] -= gp[idx];
            if (i > 0) dp[idx] += gp[idx - w];
          }
        }
      }
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override {
    return horizontal_ ? "forward_diff_x" : "forward_diff_y";
  }

 private:
  bool horizontal_;
};

class LinearNode : public Node {
 public:
  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    TensorImpl* w = inputs_[1].get();
    TensorImpl* b = inputs_[2].get();
    const int n = x->shape[0];
    const int d = x->shape[1];
    const int o = w->shape[1];
    if (b->requires_grad) {
      std::vector<double> db(o, 0.0);
      for (int i = 0; i < n; ++i) {
        const double* gr = g.data() + static_cast<int64_t>(i) * o;
        for (int j = 0; j < o; ++j) db[j] += gr[j];
      }
      b->accumulate_grad(db);
    }
    if (x->requires_grad) {
      std::vector<double> dx(x->numel(), 0.0);
      for (int i = 0; i < n; ++i) {
        const double* gr = g.data() + static_cast<int64_t>(i) * o;
        double* dxr = dx.data() + static_cast<int64_t>(i) * d;
        for (int k = 0; k < d; ++k) {
          const double* wr = w->data.data() + static_cast<int64_t>(k) * o;
          double s = 0.0;
          for (int j = 0; j < o; ++j) s += gr[j] * wr[j];
          dxr[k] = s;
        }
      }
      x->accumulate_grad(dx);
    }
    if (w->requires_grad) {
      std::vector<double> dw(w->numel(), 0.0);
      for (int i = 0; i < n; ++i) {
        const double* gr = g.data() + static_cast<int64_t>(i) * o;
        const double* xr = x->data.data() + static_cast<int64_t>(i) * d;
        for (int k = 0; k < d; ++k) {
          double* dwr = dw.data() + static_cast<int64_t>(k) * o;
          const double xv = xr[k];
          for (int j = 0; j < o; ++j) dwr[j] += xv * gr[j];
        }
      }
      w->accumulate_grad(dw);
    }
  }

  const char* kind() const override { return "linear"; }
};

class SoftmaxCrossEntropyNode : public Node {
 public:
  SoftmaxCrossEntropyNode(std::vector<double> probs, std::vector<int> labels)
      : probs_(std::move(probs)), labels_(std::move(labels)) {}

  void backward(std::span<const double> g) override {
    TensorImpl* x = inputs_[0].get();
    if (!x->requires_grad) return;
    const int n = x->shape[0];
    const int m = x->shape[1];
    const double gv = g[0] / n;
    std::vector<double> dx(probs_.size());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        const int64_t idx = static_cast<int64_t>(i) * m + j;
        dx[idx] = gv * (probs_[idx] - (j == labels_[i] ? 1.0 : 0.0));
      }
    }
    x->accumulate_grad(dx);
  }

  const char* kind() const override { return "softmax_cross_entropy"; }

 private:
  std::vector<double> probs_;
  std::vector<int> labels_;
};

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, BinaryNode::kAdd, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, BinaryNode::kSub, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, BinaryNode::kMul, "mul");
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, BinaryNode::kDiv, "div");
}

static Tensor affine(const Tensor& x, double a, double b) {
  Tensor out = make_output(x.shape(), std::make_shared<AffineNode>(a), {x});
  std::span<const double> xv = x.data();
  std::span<double> y = out.data();
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = a * xv[i] + b;
  return out;
}

Tensor add(const Tensor& x, double c) { return affine(x, 1.0, c); }

Tensor scale(const Tensor& x, double c) { return affine(x, c, 0.0); }

Tensor relu(const Tensor& x) {
  Tensor out = make_output(x.shape(), std::make_shared<ReluNode>(), {x});
  std::span<const double> xv = x.data();
  std::span<double> y = out.data();
  for (int64_t i = 0; i < x.numel(); ++i) {
    // NaN passes through so a diverged activation cannot hide as zero.
    y[i] = xv[i] > 0.0 || std::isnan(xv[i]) ? xv[i] : 0.0;
  }
  return out;
}

Tensor power(const Tensor& x, double alpha) {
  std::span<const double> xv = x.data();
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (xv[i] < 0.0) {
      fail("power: negative base " + std::to_string(xv[i]) +
           " at flat index " + std::to_string(i));
    }
  }
  Tensor out =
      make_output(x.shape(), std::make_shared<PowerNode>(alpha), {x});
  std::span<double> y = out.data();
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::pow(xv[i], alpha);
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  require(lo <= hi, "clamp: lo must not exceed hi");
  Tensor out =
      make_output(x.shape(), std::make_shared<ClampNode>(lo, hi), {x});
  std::span<const double> xv = x.data();
  std::span<double> y = out.data();
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::clamp(xv[i], lo, hi);
  return out;
}

Tensor reduce_mean(const Tensor& x) {
  require(x.numel() > 0, "reduce_mean: empty tensor");
  Tensor out = make_output({1}, std::make_shared<ReduceMeanNode>(), {x});
  std::span<const double> xv = x.data();
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += xv[i];
  out.data()[0] = s / static_cast<double>(x.numel());
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  if (n != x.numel()) {
    fail("reshape: cannot view " + x.shape_str() + " as " +
         shape_to_string(shape));
  }
  Tensor out =
      make_output(std::move(shape), std::make_shared<ReshapeNode>(), {x});
  std::span<const double> xv = x.data();
  std::copy(xv.begin(), xv.end(), out.data().begin());
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  const Tensor& first = parts[0];
  require(first.ndim() == 4, "concat_channels: inputs must be 4-D");
  int c_total = 0;
  for (const Tensor& p : parts) {
    require(p.ndim() == 4, "concat_channels: inputs must be 4-D");
    if (p.dim(0) != first.dim(0) || p.dim(2) != first.dim(2) ||
        p.dim(3) != first.dim(3)) {
      fail("concat_channels: incompatible shapes " + first.shape_str() +
           " vs " + p.shape_str());
    }
    c_total += p.dim(1);
  }
  Tensor out = make_output({first.dim(0), c_total, first.dim(2), first.dim(3)},
                           std::make_shared<ConcatChannelsNode>(), parts);
  const int64_t plane = static_cast<int64_t>(first.dim(2)) * first.dim(3);
  std::span<double> y = out.data();
  for (int n = 0; n < first.dim(0); ++n) {
    int64_t dst = (static_cast<int64_t>(n) * c_total) * plane;
    for (const Tensor& p : parts) {
      const int64_t len = static_cast<int64_t>(p.dim(1)) * plane;
      std::span<const double> src = p.data();
      std::copy(src.begin() + n * len, src.begin() + (n + 1) * len,
                y.begin() + dst);
      dst += len;
    }
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
  require(x.ndim() == 4, "slice_channels: input must be 4-D");
  if (c0 < 0 || c1 > x.dim(1) || c0 >= c1) {
    fail("slice_channels: range [" + std::to_string(c0) + "," +
         std::to_string(c1) + ") invalid for " + std::to_string(x.dim(1)) +
         " channels");
  }
  const int cs = c1 - c0;
  Tensor out = make_output({x.dim(0), cs, x.dim(2), x.dim(3)},
                           std::make_shared<SliceChannelsNode>(c0, c1), {x});
  const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  std::span<const double> xv = x.data();
  std::span<double> y = out.data();
  for (int n = 0; n < x.dim(0); ++n) {
    const int64_t src = (static_cast<int64_t>(n) * x.dim(1) + c0) * plane;
    const int64_t len = static_cast<int64_t>(cs) * plane;
    std::copy(xv.begin() + src, xv.begin() + src + len,
              y.begin() + static_cast<int64_t>(n) * len);
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad) {
  const ConvDims d = conv_dims(input, weight, stride, pad);
  require(bias.ndim() == 1 && bias.dim(0) == d.co,
          "conv2d: bias must be [" + std::to_string(d.co) + "]");
  Tensor out = make_output({d.n, d.co, d.oh, d.ow},
                           std::make_shared<Conv2dNode>(d),
                           {input, weight, bias});
  const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
  const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
  std::span<const double> in = input.data();
  std::span<const double> w = weight.data();
  std::span<const double> b = bias.data();
  std::span<double> y = out.data();

  for (int n = 0; n < d.n; ++n) {
    for (int k = 0; k < d.co; ++k) {
      double* yp = y.data() + (static_cast<int64_t>(n) * d.co + k) * out_plane;
      std::fill(yp, yp + out_plane, b[k]);
      for (int c = 0; c < d.ci; ++c) {
        const double* ip =
            in.data() + (static_cast<int64_t>(n) * d.ci + c) * in_plane;
        const double* wp =
            w.data() + (static_cast<int64_t>(k) * d.ci + c) * d.kh * d.kw;
        for (int r = 0; r < d.kh; ++r) {
          for (int q = 0; q < d.kw; ++q) {
            // No zero-weight shortcut: 0 * NaN must stay NaN so a poisoned
            // activation cannot hide behind a zero parameter.
            const double wv = wp[r * d.kw + q];
            const int64_t oj_lo =
                std::max<int64_t>(0, ceil_div(d.pad - q, d.stride));
            const int64_t oj_hi = std::min<int64_t>(
                d.ow - 1, floor_div(d.w - 1 + d.pad - q, d.stride));
            for (int oi = 0; oi < d.oh; ++oi) {
              const int ii = oi * d.stride - d.pad + r;
              if (ii < 0 || ii >= d.h) continue;
              const double* irow = ip + static_cast<int64_t>(ii) * d.w;
              double* yrow = yp + static_cast<int64_t>(oi) * d.ow;
              for (int64_t oj = oj_lo; oj <= oj_hi; ++oj) {
                yrow[oj] += wv * irow[oj * d.stride - d.pad + q];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor deconv2d(const Tensor& input, const Tensor& weight, int stride) {
  require(input.ndim() == 4, "deconv2d: input must be 4-D, got " +
                                 input.shape_str());
  require(stride == 2, "deconv2d: only stride 2 is supported");
  require(weight.ndim() == 4 && weight.dim(2) == 4 && weight.dim(3) == 4,
          "deconv2d: weight must be [Cin,Cout,4,4], got " +
              weight.shape_str());
  if (weight.dim(0) != input.dim(1)) {
    fail("deconv2d: weight expects " + std::to_string(weight.dim(0)) +
         " input channels, input has " + std::to_string(input.dim(1)));
  }
  const int n = input.dim(0);
  const int ci = input.dim(1);
  const int h = input.dim(2);
  const int w = input.dim(3);
  const int co = weight.dim(1);
  Tensor out = make_output({n, co, 2 * h, 2 * w},
                           std::make_shared<Deconv2dNode>(n, ci, h, w, co),
                           {input, weight});
  const int64_t out_plane = static_cast<int64_t>(4) * h * w;
  const int64_t in_plane = static_cast<int64_t>(h) * w;
  std::span<const double> in = input.data();
  std::span<const double> wt = weight.data();
  std::span<double> y = out.data();
  const int ow = 2 * w;

  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < ci; ++c) {
      const double* ip =
          in.data() + (static_cast<int64_t>(b) * ci + c) * in_plane;
      for (int k = 0; k < co; ++k) {
        double* yp =
            y.data() + (static_cast<int64_t>(b) * co + k) * out_plane;
        const double* wp = wt.data() + (static_cast<int64_t>(c) * co + k) * 16;
        for (int r = 0; r < 4; ++r) {
          for (int q = 0; q < 4; ++q) {
            const double wv = wp[r * 4 + q];
            for (int i = 0; i < h; ++i) {
              const int oi = 2 * i + r - 1;
              if (oi < 0 || oi >= 2 * h) continue;
              const double* irow = ip + static_cast<int64_t>(i) * w;
              double* yrow = yp + static_cast<int64_t>(oi) * ow;
              const int j_lo = q == 0 ? 1 : 0;
              const int j_hi = (2 * (w - 1) + q - 1 < ow) ? w - 1 : w - 2;
              for (int j = j_lo; j <= j_hi; ++j) {
                yrow[2 * j + q - 1] += wv * irow[j];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, int k, int stride) {
  require(input.ndim() == 4, "maxpool2d: input must be 4-D, got " +
                                 input.shape_str());
  require(k >= 1 && stride >= 1, "maxpool2d: k and stride must be >= 1");
  const int h = input.dim(2);
  const int w = input.dim(3);
  if (h < k || w < k || (h - k) % stride != 0 || (w - k) % stride != 0) {
    fail("maxpool2d: window " + std::to_string(k) + "/stride " +
         std::to_string(stride) + " does not tile " + std::to_string(h) +
         "x" + std::to_string(w));
  }
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  const int64_t planes = static_cast<int64_t>(input.dim(0)) * input.dim(1);
  std::vector<int64_t> argmax(planes * oh * ow);
  Tensor out = Tensor::zeros({input.dim(0), input.dim(1), oh, ow});
  std::span<const double> in = input.data();
  std::span<double> y = out.data();
  int64_t o = 0;
  for (int64_t p = 0; p < planes; ++p) {
    const int64_t base = p * h * w;
    for (int oi = 0; oi < oh; ++oi) {
      for (int oj = 0; oj < ow; ++oj, ++o) {
        int64_t best = base + static_cast<int64_t>(oi * stride) * w +
                       oj * stride;
        double bv = in[best];
        for (int r = 0; r < k; ++r) {
          const int64_t row =
              base + static_cast<int64_t>(oi * stride + r) * w + oj * stride;
          for (int q = 0; q < k; ++q) {
            // NaN wins the window so divergence survives pooling.
            if (in[row + q] > bv || std::isnan(in[row + q])) {
              bv = in[row + q];
              best = row + q;
            }
          }
        }
        y[o] = bv;
        argmax[o] = best;
      }
    }
  }
  return attach_node(std::move(out),
                     std::make_shared<MaxPool2dNode>(std::move(argmax)),
                     {input});
}

Tensor avgpool2d(const Tensor& input, int k, int stride) {
  require(input.ndim() == 4, "avgpool2d: input must be 4-D, got " +
                                 input.shape_str());
  require(k >= 1 && stride >= 1, "avgpool2d: k and stride must be >= 1");
  const int h = input.dim(2);
  const int w = input.dim(3);
  if (h < k || w < k) {
    fail("avgpool2d: window " + std::to_string(k) + " larger than input " +
         std::to_string(h) + "x" + std::to_string(w));
  }
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  Tensor out = make_output({input.dim(0), input.dim(1), oh, ow},
                           std::make_shared<AvgPool2dNode>(k, stride),
                           {input});
  const double inv = 1.0 / (static_cast<double>(k) * k);
  const int64_t planes = static_cast<int64_t>(input.dim(0)) * input.dim(1);
  std::span<const double> in = input.data();
  std::span<double> y = out.data();
  int64_t o = 0;
  for (int64_t p = 0; p < planes; ++p) {
    const int64_t base = p * h * w;
    for (int oi = 0; oi < oh; ++oi) {
      for (int oj = 0; oj < ow; ++oj, ++o) {
        double s = 0.0;
        for (int r = 0; r < k; ++r) {
          const int64_t row =
              base + static_cast<int64_t>(oi * stride + r) * w + oj * stride;
          for (int q = 0; q < k; ++q) s += in[row + q];
        }
        y[o] = s * inv;
      }
    }
  }
  return out;
}

Tensor upsample2x(const Tensor& input) {
  require(input.ndim() == 4, "upsample2x: input must be 4-D, got " +
                                 input.shape_str());
  const int h = input.dim(2);
  const int w = input.dim(3);
  Tensor out = make_output({input.dim(0), input.dim(1), 2 * h, 2 * w},
                           std::make_shared<Upsample2xNode>(), {input});
  const Axis2x ay = upsample_axis(h);
  const Axis2x ax = upsample_axis(w);
  const int64_t planes = static_cast<int64_t>(input.dim(0)) * input.dim(1);
  std::span<const double> in = input.data();
  std::span<double> y = out.data();
  int64_t o = 0;
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * h * w;
    for (int oi = 0; oi < 2 * h; ++oi) {
      const double ty = ay.t[oi];
      const double* r0 = src + static_cast<int64_t>(ay.lo[oi]) * w;
      const double* r1 = src + static_cast<int64_t>(ay.hi[oi]) * w;
      for (int oj = 0; oj < 2 * w; ++oj, ++o) {
        const double tx = ax.t[oj];
        const double top = (1 - tx) * r0[ax.lo[oj]] + tx * r0[ax.hi[oj]];
        const double bot = (1 - tx) * r1[ax.lo[oj]] + tx * r1[ax.hi[oj]];
        y[o] = (1 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

static Tensor forward_diff(const Tensor& input, bool horizontal,
                           const char* name) {
  require(input.ndim() == 4,
          std::string(name) + ": input must be 4-D, got " + input.shape_str());
  Tensor out = make_output(
      input.shape(), std::make_shared<ForwardDiffNode>(horizontal), {input});
  const int h = input.dim(2);
  const int w = input.dim(3);
  const int64_t planes = static_cast<int64_t>(input.dim(0)) * input.dim(1);
  std::span<const double> x = input.data();
  std::span<double> y = out.data();
  for (int64_t p = 0; p < planes; ++p) {
    const double* xp = x.data() + p * h * w;
    double* yp = y.data() + p * h * w;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const int64_t idx = static_cast<int64_t>(i) * w + j;
        if (horizontal) {
          yp[idx] = j < w - 1 ? xp[idx + 1] - xp[idx] : 0.0;
        } else {
          yp[idx] = i < h - 1 ? xp[idx + w] - xp[idx] : 0.0;
        }
      }
    }
  }
  return out;
}

Tensor forward_diff_x(const Tensor& input) {
  return forward_diff(input, true, "forward_diff_x");
}

Tensor forward_diff_y(const Tensor& input) {
  return forward_diff(input, false, "forward_diff_y");
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require(input.ndim() == 2, "linear: input must be [N,D], got " +
                                 input.shape_str());
  require(weight.ndim() == 2, "linear: weight must be [D,O], got " +
                                  weight.shape_str());
  if (weight.dim(0) != input.dim(1)) {
    fail("linear: weight expects " + std::to_string(weight.dim(0)) +
         " features, input has " + std::to_string(input.dim(1)));
  }
  const int n = input.dim(0);
  const int d = input.dim(1);
  const int o = weight.dim(1);
  require(bias.ndim() == 1 && bias.dim(0) == o,
          "linear: bias must be [" + std::to_string(o) + "]");
  Tensor out = make_output({n, o}, std::make_shared<LinearNode>(),
                           {input, weight, bias});
  std::span<const double> x = input.data();
  std::span<const double> w = weight.data();
  std::span<const double> b = bias.data();
  std::span<double> y = out.data();
  for (int i = 0; i < n; ++i) {
    double* yr = y.data() + static_cast<int64_t>(i) * o;
    std::copy(b.begin(), b.end(), yr);
    const double* xr = x.data() + static_cast<int64_t>(i) * d;
    for (int k = 0; k < d; ++k) {
      const double xv = xr[k];
      const double* wr = w.data() + static_cast<int64_t>(k) * o;
      for (int j = 0; j < o; ++j) yr[j] += xv * wr[j];
    }
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels) {
  require(logits.ndim() == 2, "softmax_cross_entropy: logits must be [N,M]");
  const int n = logits.dim(0);
  const int m = logits.dim(1);
  require(static_cast<int>(labels.size()) == n,
          "softmax_cross_entropy: expected " + std::to_string(n) +
              " labels, got " + std::to_string(labels.size()));
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= m) {
      fail("softmax_cross_entropy: label " + std::to_string(labels[i]) +
           " at row " + std::to_string(i) + " outside [0," +
           std::to_string(m) + ")");
    }
  }
  std::span<const double> x = logits.data();
  std::vector<double> probs(x.size());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = x.data() + static_cast<int64_t>(i) * m;
    double* prow = probs.data() + static_cast<int64_t>(i) * m;
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (int j = 0; j < m; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z);
    for (int j = 0; j < m; ++j) prow[j] = std::exp(row[j] - mx - logz);
    loss -= row[labels[i]] - mx - logz;
  }
  Tensor out = make_output(
      {1},
      std::make_shared<SoftmaxCrossEntropyNode>(std::move(probs), labels),
      {logits});
  out.data()[0] = loss / n;
  return out;
}

std::vector<double> softmax_vector(std::span<const double> logits) {
  require(!logits.empty(), "softmax_vector: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace actmap
