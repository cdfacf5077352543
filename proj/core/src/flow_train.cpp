#include "actmap/flow_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "actmap/autograd.hpp"
#include "actmap/checkpoint.hpp"
#include "actmap/ops.hpp"
#include "actmap/synth.hpp"

namespace actmap {

namespace {

Tensor stack_entries(const std::vector<Clip>& clips,
                     const std::vector<size_t>& indices,
                     const Tensor Clip::*member, const char* what) {
  require(!indices.empty(), "batch must not be empty");
  const Tensor& first = clips.at(indices[0]).*member;
  require(first.defined(), std::string("clip has no ") + what);
  std::vector<int> shape{int(indices.size()), first.dim(0), first.dim(1),
                         first.dim(2)};
  Tensor batch = Tensor::zeros(shape);
  auto out = batch.data();
  const size_t stride = first.numel();
  for (size_t b = 0; b < indices.size(); ++b) {
    const Tensor& t = clips.at(indices[b]).*member;
    require(t.defined() && t.shape() == first.shape(),
            std::string("clips disagree on ") + what + " shape");
    std::copy_n(t.data().begin(), stride, out.begin() + b * stride);
  }
  return batch;
}

}  // namespace

Tensor stack_frames(const std::vector<Clip>& clips,
                    const std::vector<size_t>& indices) {
  return stack_entries(clips, indices, &Clip::frames, "frames");
}

Tensor stack_flows(const std::vector<Clip>& clips,
                   const std::vector<size_t>& indices) {
  return stack_entries(clips, indices, &Clip::flow, "ground-truth flow");
}

FlowTrainResult train_motionnet(MotionNet& net,
                                const std::vector<Clip>& clips,
                                const FlowTrainConfig& cfg) {
  require(!clips.empty(), "training needs at least one clip");
  require(cfg.steps >= 0, "steps must be nonnegative");
  require(cfg.batch_size >= 1, "batch size must be positive");
  const MotionNetConfig& net_cfg = net.config();
  const std::vector<int> want{3 * net_cfg.frame_count, net_cfg.height,
                              net_cfg.width};
  for (const Clip& c : clips)
    require(c.frames.defined() && c.frames.shape() == want,
            "clip " + c.id + " is " +
                (c.frames.defined() ? c.frames.shape_str() : "empty") +
                ", the network expects " + shape_to_string(want));

  const bool writing = !cfg.checkpoint_dir.empty();
  if (writing) std::filesystem::create_directories(cfg.checkpoint_dir);

  Adam adam(net.params(), cfg.adam);
  Rng rng(cfg.seed);
  FlowTrainResult result;
  result.loss_trace.reserve(size_t(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    if (cfg.halve_lr_every > 0)
      adam.set_lr(cfg.adam.lr *
                  std::pow(0.5, double(step / cfg.halve_lr_every)));

    std::vector<size_t> indices(size_t(cfg.batch_size));
    for (size_t& i : indices)
      i = size_t(uniform_int(rng, 0, int(clips.size()) - 1));

    FrameStack batch(stack_frames(clips, indices));
    Tensor loss =
        composite_loss(net.predict_flows(batch), batch, net_cfg.loss);
    const double value = loss.item();
    if (!std::isfinite(value))
      throw std::runtime_error("training diverged: loss " +
                               std::to_string(value) + " at step " +
                               std::to_string(step));
    result.loss_trace.push_back(value);

    zero_grads(net.params());
    backward(loss);
    adam.step();

    if (writing && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d.ckpt", step + 1);
      save_params(cfg.checkpoint_dir / name, net.params());
    }
  }

  if (writing && cfg.steps > 0)
    save_params(cfg.checkpoint_dir / "final.ckpt", net.params());
  return result;
}

Tensor full_res_flow(const MotionNet& net, const FrameStack& frames) {
  const std::vector<FlowField> flows = net.predict_flows(frames);
  return scale(upsample2x(flows.back().tensor), 2.0);
}

double evaluate_epe(const MotionNet& net, const std::vector<Clip>& clips) {
  require(!clips.empty(), "evaluation needs at least one clip");
  NoGradGuard off;
  double sum = 0.0;
  for (const Clip& clip : clips) {
    require(clip.flow.defined(),
            "clip " + clip.id + " has no ground-truth flow");
    FrameStack frames(reshape(clip.frames, {1, clip.frames.dim(0),
                                            clip.frames.dim(1),
                                            clip.frames.dim(2)}));
    const Tensor pred = full_res_flow(net, frames);
    const Tensor truth = reshape(
        clip.flow, {1, clip.flow.dim(0), clip.flow.dim(1), clip.flow.dim(2)});
    sum += endpoint_error(FlowField(pred), FlowField(truth));
  }
  return sum / double(clips.size());
}

}  // namespace actmap
