#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pfgt/ops.hpp"
#include "pfgt/rng.hpp"
#include "pfgt/tensor.hpp"
#include "support/gradient_check.hpp"

using namespace pfgt;
using pfgt_test::check_gradients;

namespace {

using DTensor = TensorT<double>;

DTensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad, double sigma = 1.0) {
  auto t = DTensor::zeros(std::move(shape), requires_grad);
  for (auto& v : *t.data) v = rng.normal(0.0, sigma);
  return t;
}

// Projects an op output to a scalar through a fixed random weighting so
// every output element influences the loss with a distinct coefficient.
DTensor project(const DTensor& out, const DTensor& weights) {
  return ops::mean_all(ops::mul(out, weights));
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("finite differences: matmul family") {
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    const int m = 1 + rng.uniform_int(5), k = 1 + rng.uniform_int(5), n = 1 + rng.uniform_int(5);
    auto a = random_tensor({m, k}, rng, true);
    auto b = random_tensor({k, n}, rng, true);
    auto bt = random_tensor({n, k}, rng, true);
    auto w = random_tensor({m, n}, rng, false);

    auto r1 = check_gradients([&] { return project(ops::matmul(a, b), w); }, {&a, &b});
    CHECK(r1.max_rel_error < kTol);
    auto r2 = check_gradients([&] { return project(ops::matmul_nt(a, bt), w); }, {&a, &bt});
    CHECK(r2.max_rel_error < kTol);
  }
}

TEST_CASE("finite differences: add, mul, scale, add_rowvec, reshape") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const int m = 1 + rng.uniform_int(4), n = 1 + rng.uniform_int(6);
    auto a = random_tensor({m, n}, rng, true);
    auto b = random_tensor({m, n}, rng, true);
    auto bias = random_tensor({n}, rng, true);
    auto w = random_tensor({m, n}, rng, false);
    const double s = rng.normal(0.0, 2.0);

    CHECK(check_gradients([&] { return project(ops::add(a, b), w); }, {&a, &b}).max_rel_error < kTol);
    CHECK(check_gradients([&] { return project(ops::mul(a, b), w); }, {&a, &b}).max_rel_error < kTol);
    CHECK(check_gradients([&] { return project(ops::scale(a, s), w); }, {&a}).max_rel_error < kTol);
    CHECK(check_gradients([&] { return project(ops::add_rowvec(a, bias), w); }, {&a, &bias})
              .max_rel_error < kTol);
    auto wf = random_tensor({m * n}, rng, false);
    CHECK(check_gradients([&] { return project(ops::reshape(a, {m * n}), wf); }, {&a})
              .max_rel_error < kTol);
  }
}

TEST_CASE("finite differences: concatenation and slicing") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const int n = 2 + rng.uniform_int(4);
    auto a = random_tensor({1 + rng.uniform_int(3), n}, rng, true);
    auto b = random_tensor({1 + rng.uniform_int(3), n}, rng, true);
    auto c = random_tensor({1 + rng.uniform_int(3), n}, rng, true);
    const int rows = a.shape[0] + b.shape[0] + c.shape[0];
    auto w = random_tensor({rows, n}, rng, false);
    CHECK(check_gradients([&] { return project(ops::concat_rows<double>({a, b, c}), w); },
                          {&a, &b, &c})
              .max_rel_error < kTol);

    const int m = 2 + rng.uniform_int(3);
    auto x = random_tensor({m, 6}, rng, true);
    auto wr = random_tensor({1 + (m > 1 ? 1 : 0), 6}, rng, false);
    const int r0 = rng.uniform_int(m - wr.shape[0] + 1);
    CHECK(check_gradients([&] { return project(ops::slice_rows(x, r0, wr.shape[0]), wr); }, {&x})
              .max_rel_error < kTol);
    auto wc = random_tensor({m, 2}, rng, false);
    const int c0 = rng.uniform_int(5);
    CHECK(check_gradients([&] { return project(ops::slice_cols(x, c0, 2), wc); }, {&x})
              .max_rel_error < kTol);

    auto u = random_tensor({m, 2}, rng, true);
    auto v = random_tensor({m, 3}, rng, true);
    auto wcc = random_tensor({m, 5}, rng, false);
    CHECK(check_gradients([&] { return project(ops::concat_cols<double>({u, v}), wcc); }, {&u, &v})
              .max_rel_error < kTol);
  }
}

TEST_CASE("finite differences: layer_norm, gelu, softmax") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const int m = 1 + rng.uniform_int(4), n = 2 + rng.uniform_int(6);
    auto x = random_tensor({m, n}, rng, true);
    auto gamma = random_tensor({n}, rng, true);
    auto beta = random_tensor({n}, rng, true);
    auto w = random_tensor({m, n}, rng, false);

    CHECK(check_gradients([&] { return project(ops::layer_norm(x, gamma, beta, 1e-5), w); },
                          {&x, &gamma, &beta})
              .max_rel_error < kTol);
    CHECK(check_gradients([&] { return project(ops::gelu(x), w); }, {&x}).max_rel_error < kTol);
    CHECK(check_gradients([&] { return project(ops::softmax(x), w); }, {&x}).max_rel_error < kTol);
  }
}

TEST_CASE("finite differences: losses and mean") {
  Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    const int k = 2 + rng.uniform_int(7);
    auto logits = random_tensor({k}, rng, true, 2.0);
    const int label = rng.uniform_int(k);
    CHECK(check_gradients([&] { return ops::cross_entropy(logits, label); }, {&logits})
              .max_rel_error < kTol);
    CHECK(check_gradients([&] { return ops::kl_to_uniform(logits); }, {&logits}).max_rel_error <
          kTol);
    auto x = random_tensor({2, 3}, rng, true);
    CHECK(check_gradients([&] { return ops::mean_all(x); }, {&x}).max_rel_error < kTol);
  }
}

TEST_CASE("backward rejects non-scalar and untracked losses") {
  auto v = TensorT<double>::zeros({3}, true);
  CHECK_THROWS_AS(backward(v), std::invalid_argument);
  auto s = TensorT<double>::scalar(1.0, false);
  CHECK_THROWS_AS(backward(s), std::invalid_argument);
}

TEST_CASE("parameter not on the loss path keeps a zero gradient") {
  Rng rng(15);
  auto a = random_tensor({2, 2}, rng, true);
  auto unused = random_tensor({2, 2}, rng, true);
  auto loss = ops::mean_all(ops::mul(a, a));
  backward(loss);
  for (double g : *unused.grad) CHECK(g == 0.0);
  bool any_nonzero = false;
  for (double g : *a.grad) any_nonzero |= (g != 0.0);
  CHECK(any_nonzero);
}

TEST_CASE("gradients accumulate additively: two backward calls double them") {
  Rng rng(16);
  auto a = random_tensor({3, 3}, rng, true);
  auto b = random_tensor({3, 3}, rng, true);
  auto w = random_tensor({3, 3}, rng, false);
  auto loss = project(ops::matmul(a, b), w);
  backward(loss);
  const auto once = *a.grad;
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK((*a.grad)[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));

  a.zero_grad();
  for (double g : *a.grad) CHECK(g == 0.0);
}

TEST_CASE("forward and gradients are deterministic for identical inputs") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_tensor({4, 5}, rng, true);
    auto g = random_tensor({5}, rng, true);
    auto bt = random_tensor({5}, rng, true);
    auto w = random_tensor({4, 5}, rng, false);
    auto loss = project(ops::gelu(ops::layer_norm(x, g, bt, 1e-5)), w);
    backward(loss);
    std::vector<double> out = {loss.value()};
    out.insert(out.end(), x.grad->begin(), x.grad->end());
    return out;
  };
  CHECK(run(99) == run(99));
}
