#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fscil/random.hpp"

using namespace fscil;

TEST_CASE("identical seed and purpose reproduce the sequence") {
  RandomStream a(42, "unit");
  RandomStream b(42, "unit");
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("purpose labels give independent streams") {
  RandomStream a(42, "alpha");
  RandomStream b(42, "beta");
  int equal = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++equal;
  }
  CHECK(equal == 0);
  RandomStream c(42, "alpha");
  RandomStream d(43, "alpha");
  CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("uniforms live in the half-open unit interval") {
  RandomStream rng(1, "uniform");
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("normal deviates have standard moments") {
  RandomStream rng(2, "normal");
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("draw_normal sizes and rejects zero") {
  RandomStream rng(3, "draw");
  CHECK(rng.draw_normal(7).size() == 7);
  CHECK_THROWS_AS(rng.draw_normal(0), std::invalid_argument);
}

TEST_CASE("bounded index is in range and roughly uniform") {
  RandomStream rng(4, "index");
  CHECK_THROWS_AS(rng.next_index(0), std::invalid_argument);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const std::size_t k = rng.next_index(5);
    REQUIRE(k < 5);
    ++counts[k];
  }
  for (int c : counts) {
    CHECK(c > n / 5 - 600);
    CHECK(c < n / 5 + 600);
  }
}

TEST_CASE("shuffle is a permutation and depends on the stream") {
  RandomStream rng(5, "shuffle");
  std::vector<int> items(20);
  std::iota(items.begin(), items.end(), 0);
  std::vector<int> original = items;
  rng.shuffle(items);
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == original);
  CHECK(items != original);

  RandomStream rng2(5, "shuffle");
  std::vector<int> again = original;
  rng2.shuffle(again);
  CHECK(again == items);
}

TEST_CASE("fnv1a64 frozen values") {
  // Reference digests of the 64-bit FNV-1a algorithm.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
