#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "jcpa/random.hpp"

namespace jcpa {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformStaysInUnitInterval) {
  Rng r(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_LT(lo, 1e-3);
  EXPECT_GT(hi, 1.0 - 1e-3);
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, ExponentialHasUnitMeanAndVariance) {
  Rng r(7);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = r.exponential();
    ASSERT_GE(x, 0.0);
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 1.0, 0.01);
  EXPECT_NEAR(s2 / n - mean * mean, 1.0, 0.03);
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng r(3);
  std::vector<int> counts(5, 0);
  for (int k = 0; k < 50000; ++k) ++counts[r.uniform_index(5)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng r(9);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  r.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(DeriveSeed, ChildStreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t parent : {0ULL, 1ULL, 2ULL}) {
    for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(parent, k));
  }
  EXPECT_EQ(seen.size(), 3000u);
  EXPECT_EQ(derive_seed(5, 6), derive_seed(5, 6));
  EXPECT_NE(derive_seed(5, 6), derive_seed(6, 5));
}

}  // namespace
}  // namespace jcpa
