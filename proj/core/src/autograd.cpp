#include "actmap/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace actmap {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool needs_tape(const std::vector<Tensor>& inputs) {
  if (!g_grad_enabled) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

Tensor attach_node(Tensor out, std::shared_ptr<Node> node,
                   const std::vector<Tensor>& inputs) {
  if (!needs_tape(inputs)) return out;
  node->inputs_.reserve(inputs.size());
  for (const Tensor& t : inputs) node->inputs_.push_back(t.impl());
  node->output_ = out.raw();
  out.raw()->grad_fn = std::move(node);
  out.set_requires_grad(true);
  return out;
}

namespace {

// Post-order over the node graph: producers come before consumers, so the
// reversed list is a valid processing order for the backward sweep.
void topo_collect(Node* root, std::vector<Node*>& order) {
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& ins = node->inputs();
    bool descended = false;
    while (next < ins.size()) {
      Node* child = ins[next].get() ? ins[next]->grad_fn.get() : nullptr;
      ++next;
      if (child && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
        descended = true;
        break;
      }
    }
    if (!descended && stack.back().second >= ins.size()) {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void backward(const Tensor& sink, bool retain_graph) {
  require(sink.defined(), "backward: undefined sink");
  require(sink.numel() == 1,
          "backward: sink must be scalar, got shape " + sink.shape_str());
  TensorImpl* root = sink.raw();
  if (!root->grad_fn) return;  // leaf sink: nothing upstream

  root->accumulate_grad(std::vector<double>{1.0});

  std::vector<Node*> order;
  topo_collect(root->grad_fn.get(), order);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    TensorImpl* out = node->output();
    if (out->grad.empty()) continue;  // no contribution reached this value
    node->backward(out->grad);
    // Intermediate gradients are transient; only leaves keep theirs, so a
    // later sweep starts from a clean slate.
    out->grad.clear();
    out->grad.shrink_to_fit();
  }

  if (!retain_graph) {
    // Release the visited tape; dropping grad_fn frees each node together
    // with its saved inputs once no other tensor references them.
    for (Node* node : order) node->output()->grad_fn.reset();
  }
}

double gradient_check(const std::function<Tensor(const Tensor&)>& fn,
                      const Tensor& point, double eps) {
  require(eps > 0.0, "gradient_check: eps must be positive");
  Tensor x = point.clone();
  x.set_requires_grad(true);

  Tensor y = fn(x);
  require(y.numel() == 1, "gradient_check: fn must return a scalar");
  backward(y);
  require(x.has_grad(), "gradient_check: point did not receive a gradient");
  std::vector<double> analytic(x.grad().begin(), x.grad().end());

  double max_err = 0.0;
  auto data = x.data();
  NoGradGuard ng;
  for (size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + eps;
    const double fp = fn(x).item();
    data[i] = saved - eps;
    const double fm = fn(x).item();
    data[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom =
        std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
    max_err = std::max(max_err, std::fabs(analytic[i] - numeric) / denom);
  }
  return max_err;
}

}  // namespace actmap
