#pragma once

// Finite-difference gradient oracle. Independent of the reverse-mode path it
// checks: it only re-evaluates the forward function at perturbed inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pfgt/tensor.hpp"

namespace pfgt_test {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// f: builds a fresh graph over the leaves and returns a scalar loss tensor.
// Central differences at fp64 with step h; relative error denominators are
// clamped from below.
inline GradCheckResult check_gradients(const std::function<pfgt::TensorT<double>()>& f,
                                       std::vector<pfgt::TensorT<double>*> leaves,
                                       double h = 1e-5, double clamp = 1e-8) {
  for (auto* leaf : leaves) leaf->zero_grad();
  pfgt::TensorT<double> loss = f();
  pfgt::backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto* leaf : leaves) analytic.push_back(*leaf->grad);

  GradCheckResult res;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& values = *leaves[li]->data;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double lp = f().value();
      values[i] = orig - h;
      const double lm = f().value();
      values[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = analytic[li][i];
      const double denom = std::max({clamp, std::fabs(fd), std::fabs(an)});
      res.max_rel_error = std::max(res.max_rel_error, std::fabs(fd - an) / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace pfgt_test
