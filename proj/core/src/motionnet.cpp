#include "actmap/motionnet.hpp"

#include <cmath>
#include <unordered_map>

#include "actmap/ops.hpp"

namespace actmap {
namespace {

int scaled(int channels, double width_scale) {
  return static_cast<int>(std::ceil(channels * width_scale));
}

Tensor gaussian_init(std::vector<int> shape, int fan_in, Rng& rng) {
  return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / fan_in));
}

}  // namespace

void validate(const MotionNetConfig& cfg) {
  require(cfg.width_scale > 0.0 && cfg.width_scale <= 1.0,
          "motionnet: width_scale must lie in (0,1]");
  require(cfg.frame_count >= 2, "motionnet: need at least 2 frames");
  require(cfg.height % 32 == 0 && cfg.width % 32 == 0,
          "motionnet: resolution " + std::to_string(cfg.height) + "x" +
              std::to_string(cfg.width) + " not divisible by 32");
  validate(cfg.loss.pixel);
  validate(cfg.loss.smooth);
  validate(cfg.loss.ssim);
  validate(cfg.loss.weights);
}

MotionNet::MotionNet(const MotionNetConfig& cfg, Rng& rng) : cfg_(cfg) {
  validate(cfg_);
  const double ws = cfg_.width_scale;
  const int fc = cfg_.flow_channels();
  const int c1 = scaled(64, ws);
  const int c2 = scaled(128, ws);
  const int c3 = scaled(256, ws);
  const int c4 = scaled(512, ws);
  const int c5 = scaled(512, ws);
  const int c6 = scaled(1024, ws);
  const int d5 = scaled(512, ws);
  const int d4 = scaled(256, ws);
  const int d3 = scaled(128, ws);
  const int d2 = scaled(64, ws);
  const int x5 = scaled(512, ws);
  const int x4 = scaled(256, ws);
  const int x3 = scaled(128, ws);
  const int x2 = scaled(64, ws);

  auto conv = [&](const std::string& name, int cin, int cout) {
    params_.push_back(
        {name + ".w", gaussian_init({cout, cin, 3, 3}, cin * 9, rng)});
    params_.push_back({name + ".b", Tensor::zeros({cout})});
  };
  auto deconv = [&](const std::string& name, int cin, int cout) {
    params_.push_back(
        {name + ".w", gaussian_init({cin, cout, 4, 4}, cin * 16, rng)});
  };

  conv("conv1", 3 * cfg_.frame_count, c1);
  conv("conv1_1", c1, c1);
  conv("conv2", c1, c2);
  conv("conv2_1", c2, c2);
  conv("conv3", c2, c3);
  conv("conv3_1", c3, c3);
  conv("conv4", c3, c4);
  conv("conv4_1", c4, c4);
  conv("conv5", c4, c5);
  conv("conv5_1", c5, c5);
  conv("conv6", c5, c6);
  conv("conv6_1", c6, c6);

  conv("flow6", c6, fc);
  deconv("deconv5", c6, d5);
  conv("xconv5", d5 + fc + c5, x5);
  conv("flow5", x5, fc);
  deconv("deconv4", x5, d4);
  conv("xconv4", d4 + fc + c4, x4);
  conv("flow4", x4, fc);
  deconv("deconv3", x4, d3);
  conv("xconv3", d3 + fc + c3, x3);
  conv("flow3", x3, fc);
  deconv("deconv2", x3, d2);
  conv("xconv2", d2 + fc + c2, x2);
  conv("flow2", x2, fc);

  // Start from the identity warp: zero flow heads keep the initial
  // prediction at zero displacement, which the photometric terms can
  // improve on from the first step.
  zero_flow_heads();
  for (Parameter& p : params_) p.value.set_requires_grad(true);
}

Tensor MotionNet::param(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return p.value;
  }
  fail("motionnet: unknown parameter '" + name + "'");
  return {};
}

void MotionNet::zero_flow_heads() {
  for (Parameter& p : params_) {
    if (p.name.rfind("flow", 0) == 0) {
      std::fill(p.value.data().begin(), p.value.data().end(), 0.0);
    }
  }
}

std::vector<FlowField> MotionNet::predict_flows(
    const FrameStack& frames) const {
  const Tensor& in = frames.tensor;
  if (in.dim(1) != 3 * cfg_.frame_count || in.dim(2) != cfg_.height ||
      in.dim(3) != cfg_.width) {
    fail("motionnet: input " + in.shape_str() + " does not match configured " +
         std::to_string(3 * cfg_.frame_count) + "x" +
         std::to_string(cfg_.height) + "x" + std::to_string(cfg_.width));
  }

  auto conv = [&](const Tensor& x, const std::string& name, int stride) {
    return conv2d(x, param(name + ".w"), param(name + ".b"), stride, 1);
  };
  auto up_flow = [](const Tensor& f) { return scale(upsample2x(f), 2.0); };

  Tensor e1 = relu(conv(relu(conv(in, "conv1", 1)), "conv1_1", 1));
  Tensor e2 = relu(conv(relu(conv(e1, "conv2", 2)), "conv2_1", 1));
  Tensor e3 = relu(conv(relu(conv(e2, "conv3", 2)), "conv3_1", 1));
  Tensor e4 = relu(conv(relu(conv(e3, "conv4", 2)), "conv4_1", 1));
  Tensor e5 = relu(conv(relu(conv(e4, "conv5", 2)), "conv5_1", 1));
  Tensor e6 = relu(conv(relu(conv(e5, "conv6", 2)), "conv6_1", 1));

  Tensor f6 = conv(e6, "flow6", 1);
  Tensor d5 = relu(deconv2d(e6, param("deconv5.w"), 2));
  Tensor h5 = relu(conv(concat_channels({d5, up_flow(f6), e5}), "xconv5", 1));

  Tensor f5 = conv(h5, "flow5", 1);
  Tensor d4 = relu(deconv2d(h5, param("deconv4.w"), 2));
  Tensor h4 = relu(conv(concat_channels({d4, up_flow(f5), e4}), "xconv4", 1));

  Tensor f4 = conv(h4, "flow4", 1);
  Tensor d3 = relu(deconv2d(h4, param("deconv3.w"), 2));
  Tensor h3 = relu(conv(concat_channels({d3, up_flow(f4), e3}), "xconv3", 1));

  Tensor f3 = conv(h3, "flow3", 1);
  Tensor d2 = relu(deconv2d(h3, param("deconv2.w"), 2));
  Tensor h2 = relu(conv(concat_channels({d2, up_flow(f3), e2}), "xconv2", 1));

  Tensor f2 = conv(h2, "flow2", 1);

  std::vector<FlowField> flows;
  flows.reserve(5);
  for (const Tensor& f : {f6, f5, f4, f3, f2}) flows.emplace_back(f);
  return flows;
}

MotionNet build_motionnet(const MotionNetConfig& cfg, Rng& rng) {
  return MotionNet(cfg, rng);
}

}  // namespace actmap
