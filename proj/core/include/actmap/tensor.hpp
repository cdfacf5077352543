#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "actmap/common.hpp"

namespace actmap {

class Node;

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;     // row-major
  bool requires_grad = false;
  std::vector<double> grad;     // empty until the first accumulation
  std::shared_ptr<Node> grad_fn;  // producing op; null for leaves

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void accumulate_grad(std::span<const double> g);
};

// Dense row-major tensor handle with reference semantics: copies share
// storage. Gradients live on the impl and survive as long as any handle does.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data);
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0);
  static Tensor rand(std::vector<int> shape, Rng& rng, double lo = 0.0,
                     double hi = 1.0);

  bool defined() const { return impl_ != nullptr; }
  explicit operator bool() const { return defined(); }

  const std::vector<int>& shape() const { return impl_->shape; }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int64_t numel() const { return impl_->numel(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }

  // Element access for NCHW-style tensors; offsets are row-major.
  double& at(std::initializer_list<int> idx);
  double at(std::initializer_list<int> idx) const;
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> grad_mutable() { return impl_->grad; }
  void zero_grad();

  // Deep copy of shape/data; the copy is a leaf with no grad history.
  Tensor clone() const;
  // Same data, no autograd history.
  Tensor detach() const;

  bool all_finite() const;
  std::string shape_str() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  TensorImpl* raw() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor wrap_impl(std::shared_ptr<TensorImpl> impl);
};

inline Tensor wrap_impl(std::shared_ptr<TensorImpl> impl) {
  return Tensor(std::move(impl));
}

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace actmap
