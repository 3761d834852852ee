#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "figs/rng.hpp"

using namespace figs;

TEST_CASE("fnv1a matches published test vectors", "[rng]") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("splitmix64 avalanche and sequence stability", "[rng]") {
  std::uint64_t s = 1;
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  CHECK(a != b);
  std::uint64_t s2 = 1;
  CHECK(splitmix64(s2) == a);
  CHECK(splitmix64(s2) == b);
}

TEST_CASE("derive_stream separates names and indices", "[rng]") {
  const std::uint64_t root = 12345;
  std::set<std::uint64_t> seen;
  for (const char* name : {"env", "init", "exploration", "eval", "replay"}) {
    CHECK(seen.insert(derive_stream(root, name)).second);
  }
  for (std::uint64_t i = 0; i < 100; ++i) {
    CHECK(seen.insert(derive_stream(root, "env", i)).second);
  }
  CHECK(derive_stream(root, "env", 7) == derive_stream(root, "env", 7));
  CHECK(derive_stream(root, "env") != derive_stream(root + 1, "env"));
}

TEST_CASE("uniform draws live in [0,1) and are deterministic", "[rng]") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
  Rng c(42);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = c.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < -1.5);
  CHECK(hi > 2.5);
}

TEST_CASE("normal draws have the right first two moments", "[rng]") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("below covers its range uniformly", "[rng]") {
  Rng rng(99);
  const std::uint64_t n = 7;
  std::array<int, 7> counts{};
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t v = rng.below(n);
    REQUIRE(v < n);
    ++counts[v];
  }
  // 5-sigma binomial band around draws/7.
  const double expect = draws / 7.0;
  const double sigma = std::sqrt(draws * (1.0 / 7.0) * (6.0 / 7.0));
  for (const int c : counts) {
    CHECK(std::abs(c - expect) < 5.0 * sigma);
  }
  CHECK_THROWS_AS(rng.below(0), Error);
}
