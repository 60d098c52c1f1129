#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfgt/tensor.hpp"

namespace pfgt {

// Named model parameter. frozen=true pins the values for the lifetime of
// the model: the optimizer skips it and it never tracks gradients.
template <typename T>
struct ParameterT {
  TensorT<T> tensor;
  std::string name;
  bool frozen = false;

  ParameterT() = default;
  ParameterT(TensorT<T> t, std::string n, bool f) : tensor(std::move(t)), name(std::move(n)), frozen(f) {
    tensor.set_requires_grad(!frozen);
  }
};

using Parameter = ParameterT<float>;

// Adam with bias correction, no weight decay. Moment slots are allocated
// per parameter on first step.
template <typename T>
class AdamT {
 public:
  explicit AdamT(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ParameterT<T>*>& params) {
    if (slots_.empty()) {
      slots_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        slots_[i].m.assign(params[i]->tensor.numel(), T(0));
        slots_[i].v.assign(params[i]->tensor.numel(), T(0));
      }
    } else if (slots_.size() != params.size()) {
      throw std::logic_error("Adam::step: parameter list changed size");
    }
    ++step_count_;
    ++total_step_count();
    const T bc1 = T(1) - std::pow(beta1_, T(step_count_));
    const T bc2 = T(1) - std::pow(beta2_, T(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      ParameterT<T>& p = *params[i];
      if (p.frozen || !p.tensor.requires_grad) continue;
      auto& w = *p.tensor.data;
      const auto& g = *p.tensor.grad;
      auto& m = slots_[i].m;
      auto& v = slots_[i].v;
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  static void zero_grad(const std::vector<ParameterT<T>*>& params) {
    for (auto* p : params) p->tensor.zero_grad();
  }

  std::int64_t step_count() const { return step_count_; }
  T learning_rate() const { return lr_; }

  // Process-wide step counter across all optimizer instances. Lets harness
  // code assert that unlearning paths trigger no training whatsoever.
  static std::int64_t& total_step_count() {
    static std::int64_t n = 0;
    return n;
  }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  T lr_, beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  std::vector<Slot> slots_;
};

using Adam = AdamT<float>;

}  // namespace pfgt
