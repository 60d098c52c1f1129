#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <vector>

#include "pfgt/rng.hpp"
#include "support/stats.hpp"

using namespace pfgt;

TEST_CASE("same seed replays the same stream; copies fork it") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(7);
  c.next_u64();
  Rng fork = c;  // value copy at current position
  CHECK(c.next_u64() == fork.next_u64());
}

TEST_CASE("substreams are independent of draw order and of each other") {
  Rng top(123);
  auto s1 = top.substream("data");
  auto s2 = top.substream("init");
  CHECK(s1.next_u64() != s2.next_u64());

  // Deriving again from the same top seed replays the same substream.
  auto s1a = Rng(123).substream("data");
  auto s1b = Rng(123).substream("data");
  for (int i = 0; i < 50; ++i) CHECK(s1a.next_u64() == s1b.next_u64());
}

TEST_CASE("uniform_int covers its range and stays in bounds") {
  Rng rng(5);
  std::vector<long> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const int v = rng.uniform_int(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  CHECK(pfgt_test::chi_square_uniform(counts) < pfgt_test::chi_square_crit_999(6));
}

TEST_CASE("shuffle is uniform over permutations of three items") {
  Rng rng(6);
  std::vector<long> counts(6, 0);
  for (int i = 0; i < 60000; ++i) {
    std::vector<int> v = {0, 1, 2};
    rng.shuffle(v);
    const int code = v[0] * 2 + (v[1] > v[2] ? 1 : 0);
    ++counts[static_cast<std::size_t>(code)];
  }
  CHECK(pfgt_test::chi_square_uniform(counts) < pfgt_test::chi_square_crit_999(5));
}

TEST_CASE("sample_subset draws uniform subsets without replacement") {
  Rng rng(7);
  // All C(4,2)=6 subsets of {0..3}.
  std::map<std::set<int>, long> counts;
  for (int i = 0; i < 60000; ++i) {
    auto s = rng.sample_subset(4, 2);
    REQUIRE(s.size() == 2);
    REQUIRE(s[0] != s[1]);
    counts[std::set<int>(s.begin(), s.end())]++;
  }
  REQUIRE(counts.size() == 6);
  std::vector<long> flat;
  for (auto& [k, v] : counts) flat.push_back(v);
  CHECK(pfgt_test::chi_square_uniform(flat) < pfgt_test::chi_square_crit_999(5));
}

TEST_CASE("truncated normal respects the cut") {
  Rng rng(8);
  for (int i = 0; i < 20000; ++i) {
    const double v = rng.truncated_normal(0.0, 0.02, 2.0);
    CHECK(v >= -0.04);
    CHECK(v <= 0.04);
  }
}
