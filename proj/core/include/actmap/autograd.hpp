#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "actmap/tensor.hpp"

namespace actmap {

// One recorded forward op. Nodes own shared references to their input
// tensors (which is what keeps saved activations alive) and a raw back
// pointer to the output they produced. Each op produces exactly one output.
class Node {
 public:
  virtual ~Node() = default;

  // Accumulates d(loss)/d(input) into each input's grad buffer, given
  // d(loss)/d(output).
  virtual void backward(std::span<const double> grad_out) = 0;
  virtual const char* kind() const = 0;

  const std::vector<std::shared_ptr<TensorImpl>>& inputs() const {
    return inputs_;
  }
  TensorImpl* output() const { return output_; }

 protected:
  friend Tensor attach_node(Tensor out, std::shared_ptr<Node> node,
                            const std::vector<Tensor>& inputs);
  std::vector<std::shared_ptr<TensorImpl>> inputs_;
  TensorImpl* output_ = nullptr;
};

// Thread-local switch; ops record nodes only while enabled.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// True if any input requires grad and recording is on; used by every op to
// decide whether to attach a node.
bool needs_tape(const std::vector<Tensor>& inputs);

// Wires node <-> tensors and marks the output as requiring grad.
Tensor attach_node(Tensor out, std::shared_ptr<Node> node,
                   const std::vector<Tensor>& inputs);

// Reverse sweep from a scalar sink. Visits each reachable node exactly once
// in reverse topological order. By default the visited part of the tape is
// released afterwards (saved activations freed); pass retain_graph=true to
// keep it for another sweep.
void backward(const Tensor& sink, bool retain_graph = false);

// Max over coordinates of |analytic - central difference| relative error,
// with the usual max(|a|,|n|,1e-8) denominator. fn must be a deterministic
// map from the given tensor to a scalar.
double gradient_check(const std::function<Tensor(const Tensor&)>& fn,
                      const Tensor& point, double eps);

}  // namespace actmap
