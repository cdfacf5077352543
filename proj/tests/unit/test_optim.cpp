#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "actmap/autograd.hpp"
#include "actmap/ops.hpp"
#include "actmap/optim.hpp"

using namespace actmap;

namespace {

void set_grad(Tensor& t, double g) {
  t.set_requires_grad(true);
  std::vector<double> gv(t.numel(), g);
  t.raw()->accumulate_grad(gv);
}

}  // namespace

TEST_CASE("adam with a constant gradient steps by lr*g/(|g|+eps)") {
  // With g fixed, bias correction cancels exactly: m_hat = g, v_hat = g*g,
  // so every step moves by the same closed-form amount.
  ParamList params;
  params.push_back({"w", Tensor::full({3}, 1.0)});
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt(params, cfg);

  const double g = 0.5;
  const double delta = cfg.lr * g / (std::fabs(g) + cfg.eps);
  double expect = 1.0;
  for (int t = 0; t < 5; ++t) {
    zero_grads(params);
    set_grad(params[0].value, g);
    opt.step();
    expect -= delta;
    for (double w : params[0].value.data()) {
      CHECK(w == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  CHECK(opt.steps() == 5);
}

TEST_CASE("adam leaves parameters without gradients untouched") {
  ParamList params;
  params.push_back({"a", Tensor::full({2}, 3.0)});
  params.push_back({"b", Tensor::full({2}, 4.0)});
  Adam opt(params, {});
  set_grad(params[0].value, 1.0);
  opt.step();
  CHECK(params[0].value.data()[0] != 3.0);
  CHECK(params[1].value.data()[0] == 4.0);
}

TEST_CASE("sgd momentum accumulates velocity") {
  ParamList params;
  params.push_back({"w", Tensor::full({1}, 0.0)});
  SgdConfig cfg;
  cfg.lr = 0.1;
  cfg.momentum = 0.9;
  SgdMomentum opt(params, cfg);

  // u1 = 1, p1 = -0.1; u2 = 1.9, p2 = -0.29; u3 = 2.71, p3 = -0.561
  double u = 0.0;
  double p = 0.0;
  for (int t = 0; t < 3; ++t) {
    zero_grads(params);
    set_grad(params[0].value, 1.0);
    opt.step();
    u = 0.9 * u + 1.0;
    p -= 0.1 * u;
    CHECK(params[0].value.data()[0] == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("adam drives a quadratic towards its minimum") {
  ParamList params;
  params.push_back({"x", Tensor::from_data({2}, {5.0, -3.0})});
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam opt(params, cfg);
  for (int t = 0; t < 400; ++t) {
    zero_grads(params);
    Tensor& x = params[0].value;
    x.set_requires_grad(true);
    backward(reduce_mean(mul(x, x)));
    opt.step();
  }
  CHECK(std::fabs(params[0].value.data()[0]) < 1e-2);
  CHECK(std::fabs(params[0].value.data()[1]) < 1e-2);
}

TEST_CASE("step decay multiplies at each boundary") {
  StepDecay sched;
  sched.base_lr = 1.0;
  sched.factor = 0.1;
  sched.boundaries = {10, 20};
  CHECK(sched.at(0) == doctest::Approx(1.0));
  CHECK(sched.at(9) == doctest::Approx(1.0));
  CHECK(sched.at(10) == doctest::Approx(0.1));
  CHECK(sched.at(19) == doctest::Approx(0.1));
  CHECK(sched.at(20) == doctest::Approx(0.01));
  CHECK(sched.at(1000) == doctest::Approx(0.01));
}

TEST_CASE("grads_finite flags NaN gradients") {
  ParamList params;
  params.push_back({"w", Tensor::full({2}, 1.0)});
  set_grad(params[0].value, 1.0);
  CHECK(grads_finite(params));
  params[0].value.grad_mutable()[1] = std::nan("");
  CHECK_FALSE(grads_finite(params));
}
