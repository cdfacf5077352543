#include "actmap/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace actmap {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    require(d > 0, "tensor dimensions must be positive, got " +
                       shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void TensorImpl::accumulate_grad(std::span<const double> g) {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  for (size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
}

Tensor::Tensor(std::vector<int> shape, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<size_t>(n), 0.0);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = value;
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data) {
  const int64_t n = shape_numel(shape);
  require(n == static_cast<int64_t>(data.size()),
          "from_data: shape " + shape_to_string(shape) + " wants " +
              std::to_string(n) + " values, got " +
              std::to_string(data.size()));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return wrap_impl(std::move(impl));
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = normal(rng, 0.0, stddev);
  return t;
}

Tensor Tensor::rand(std::vector<int> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

namespace {
int64_t flat_offset(const std::vector<int>& shape,
                    std::initializer_list<int> idx) {
  require(idx.size() == shape.size(),
          "index rank " + std::to_string(idx.size()) + " != tensor rank " +
              std::to_string(shape.size()));
  int64_t off = 0;
  size_t d = 0;
  for (int i : idx) {
    require(i >= 0 && i < shape[d], "index out of range in dim " +
                                        std::to_string(d) + " of shape " +
                                        shape_to_string(shape));
    off = off * shape[d] + i;
    ++d;
  }
  return off;
}
}  // namespace

double& Tensor::at(std::initializer_list<int> idx) {
  return impl_->data[static_cast<size_t>(flat_offset(impl_->shape, idx))];
}

double Tensor::at(std::initializer_list<int> idx) const {
  return impl_->data[static_cast<size_t>(flat_offset(impl_->shape, idx))];
}

double Tensor::item() const {
  require(numel() == 1, "item() on tensor of shape " + shape_str());
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
  impl_->requires_grad = v;
  return *this;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return wrap_impl(std::move(impl));
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return wrap_impl(std::move(impl));
}

bool Tensor::all_finite() const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(impl_->shape); }

}  // namespace actmap
