#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pfgt/optimizer.hpp"
#include "pfgt/tensor.hpp"

using namespace pfgt;

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParameterT<double> p(TensorT<double>::from_values({3}, {1.0, -2.0, 0.5}), "w", false);
  const auto before = *p.tensor.data;
  AdamT<double> opt(1e-3);
  std::vector<ParameterT<double>*> params = {&p};
  opt.step(params);
  CHECK(*p.tensor.data == before);
}

TEST_CASE("frozen parameters are never modified, even with a gradient") {
  ParameterT<double> p(TensorT<double>::from_values({2}, {4.0, 5.0}), "theta", true);
  CHECK_FALSE(p.tensor.requires_grad);
  // Force a gradient buffer onto the frozen tensor; step must still skip it.
  p.tensor.grad = std::make_shared<std::vector<double>>(2, 1.0);
  const auto before = *p.tensor.data;
  AdamT<double> opt(0.1);
  std::vector<ParameterT<double>*> params = {&p};
  opt.step(params);
  opt.step(params);
  CHECK(*p.tensor.data == before);
}

TEST_CASE("scalar trajectory matches a hand-stepped Adam reference") {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::vector<double> grads = {0.3, -0.1, 0.7, 0.2, -0.5, 0.0, 1.3};

  ParameterT<double> p(TensorT<double>::scalar(0.25), "w", false);
  AdamT<double> opt(lr, b1, b2, eps);
  std::vector<ParameterT<double>*> params = {&p};

  double w = 0.25, m = 0.0, v = 0.0;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    (*p.tensor.grad)[0] = grads[t];
    opt.step(params);

    m = b1 * m + (1 - b1) * grads[t];
    v = b2 * v + (1 - b2) * grads[t] * grads[t];
    const double mhat = m / (1 - std::pow(b1, double(t + 1)));
    const double vhat = v / (1 - std::pow(b2, double(t + 1)));
    w -= lr * mhat / (std::sqrt(vhat) + eps);

    CHECK(std::fabs((*p.tensor.data)[0] - w) < 1e-9);
    AdamT<double>::zero_grad(params);
  }
  CHECK(opt.step_count() == static_cast<std::int64_t>(grads.size()));
}
