#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "pfgt/ops.hpp"
#include "pfgt/rng.hpp"
#include "pfgt/tensor.hpp"

using namespace pfgt;
using DTensor = TensorT<double>;

TEST_CASE("softmax closed forms") {
  auto two = ops::softmax(DTensor::from_values({2}, {0.0, 0.0}));
  CHECK(two.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(two.at(1) == doctest::Approx(0.5).epsilon(1e-12));

  auto skew = ops::softmax(DTensor::from_values({2}, {std::log(2.0), 0.0}));
  CHECK(skew.at(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(skew.at(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and normalizes") {
  Rng rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + rng.uniform_int(9);
    std::vector<double> z(k);
    for (auto& v : z) v = rng.normal(0.0, 3.0);
    const double c = rng.normal(0.0, 10.0);
    std::vector<double> zs = z;
    for (auto& v : zs) v += c;

    auto p = ops::softmax(DTensor::from_values({k}, z));
    auto ps = ops::softmax(DTensor::from_values({k}, zs));
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      CHECK(p.at(i) >= 0.0);
      CHECK(std::fabs(p.at(i) - ps.at(i)) < 1e-9);
      sum += p.at(i);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("softmax rejects non-finite input") {
  auto bad = DTensor::from_values({2}, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(ops::softmax(bad), std::invalid_argument);
}

TEST_CASE("cross entropy closed forms") {
  auto uniform8 = DTensor::zeros({8});
  for (int label = 0; label < 8; ++label) {
    CHECK(ops::cross_entropy(uniform8, label).value() ==
          doctest::Approx(std::log(8.0)).epsilon(1e-12));
  }
  auto two = DTensor::from_values({2}, {1.0, 0.0});
  CHECK(ops::cross_entropy(two, 0).value() ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  auto logits = DTensor::zeros({4});
  CHECK_THROWS_AS(ops::cross_entropy(logits, -1), std::invalid_argument);
  CHECK_THROWS_AS(ops::cross_entropy(logits, 4), std::invalid_argument);
}

TEST_CASE("cross entropy gradient equals softmax minus one-hot") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + rng.uniform_int(7);
    std::vector<double> z(k);
    for (auto& v : z) v = rng.normal(0.0, 2.0);
    const int label = rng.uniform_int(k);

    auto logits = DTensor::from_values({k}, z, true);
    auto loss = ops::cross_entropy(logits, label);
    backward(loss);
    auto p = ops::softmax(DTensor::from_values({k}, z));
    for (int j = 0; j < k; ++j) {
      const double want = p.at(j) - (j == label ? 1.0 : 0.0);
      CHECK(std::fabs((*logits.grad)[j] - want) < 1e-9);
    }
  }
}

TEST_CASE("kl_to_uniform closed forms") {
  CHECK(ops::kl_to_uniform(DTensor::zeros({8})).value() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(ops::kl_to_uniform(DTensor::from_values({8}, {3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0}))
            .value() == doctest::Approx(0.0).epsilon(1e-15));

  // One-hot limit for K=8.
  std::vector<double> hot(8, 0.0);
  hot[0] = 40.0;
  CHECK(ops::kl_to_uniform(DTensor::from_values({8}, hot)).value() ==
        doctest::Approx(std::log(8.0)).epsilon(1e-9));

  // p -> [0.5, 0.5, 0, 0] limit for K=4.
  auto half = DTensor::from_values({4}, {5.0, 5.0, -75.0, -75.0});
  CHECK(ops::kl_to_uniform(half).value() == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("kl_to_uniform is nonnegative and needs K >= 2") {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + rng.uniform_int(10);
    std::vector<double> z(k);
    for (auto& v : z) v = rng.normal(0.0, 4.0);
    CHECK(ops::kl_to_uniform(DTensor::from_values({k}, z)).value() >= 0.0);
  }
  CHECK_THROWS_AS(ops::kl_to_uniform(DTensor::zeros({1})), std::invalid_argument);
}
