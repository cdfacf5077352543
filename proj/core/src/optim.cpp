#include "actmap/optim.hpp"

#include <cmath>

#include "actmap/common.hpp"

namespace actmap {

void zero_grads(ParamList& params) {
  for (Parameter& p : params) p.value.zero_grad();
}

bool grads_finite(const ParamList& params) {
  for (const Parameter& p : params) {
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

Adam::Adam(ParamList& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  require(cfg_.lr > 0.0, "adam: lr must be positive");
  require(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0, "adam: beta1 out of range");
  require(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0, "adam: beta2 out of range");
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].value.numel(), 0.0);
    v_[i].assign(params_[i].value.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].value;
    if (!p.has_grad()) continue;
    std::span<const double> g = p.grad();
    std::span<double> w = p.data();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t j = 0; j < g.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

SgdMomentum::SgdMomentum(ParamList& params, SgdConfig cfg)
    : params_(params), cfg_(cfg) {
  require(cfg_.lr > 0.0, "sgd: lr must be positive");
  require(cfg_.momentum >= 0.0 && cfg_.momentum < 1.0,
          "sgd: momentum out of range");
  velocity_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    velocity_[i].assign(params_[i].value.numel(), 0.0);
  }
}

void SgdMomentum::step() {
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].value;
    if (!p.has_grad()) continue;
    std::span<const double> g = p.grad();
    std::span<double> w = p.data();
    std::vector<double>& u = velocity_[i];
    for (size_t j = 0; j < g.size(); ++j) {
      u[j] = cfg_.momentum * u[j] + g[j];
      w[j] -= cfg_.lr * u[j];
    }
  }
}

double StepDecay::at(int64_t step) const {
  double lr = base_lr;
  for (int64_t b : boundaries) {
    if (step >= b) lr *= factor;
  }
  return lr;
}

}  // namespace actmap
