#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actmap/tensor.hpp"

namespace actmap {

struct Parameter {
  std::string name;
  Tensor value;
};

using ParamList = std::vector<Parameter>;

void zero_grads(ParamList& params);
// True if any parameter gradient holds a non-finite value.
bool grads_finite(const ParamList& params);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParamList& params, AdamConfig cfg);

  // Applies one update from the gradients currently stored on the
  // parameters; parameters without a gradient are left untouched.
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t steps() const { return t_; }

 private:
  ParamList& params_;
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct SgdConfig {
  double lr = 1e-2;
  double momentum = 0.9;
};

class SgdMomentum {
 public:
  SgdMomentum(ParamList& params, SgdConfig cfg);

  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

 private:
  ParamList& params_;
  SgdConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

// Piecewise-constant learning rate: base_lr is multiplied by factor at each
// boundary step, applying from that step onwards.
struct StepDecay {
  double base_lr = 1e-3;
  double factor = 0.1;
  std::vector<int64_t> boundaries;

  double at(int64_t step) const;
};

}  // namespace actmap
