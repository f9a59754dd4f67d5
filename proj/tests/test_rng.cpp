#include "casper/rng.hpp"

#include "doctest.h"

#include <set>

using namespace casper;

TEST_CASE("derived seeds separate streams and counters") {
  const std::uint64_t root = 42;
  CHECK(derive_seed(root, RngStream::kReservoir) !=
        derive_seed(root, RngStream::kReplayDraw));
  CHECK(derive_seed(root, RngStream::kShuffle, 0, 0) !=
        derive_seed(root, RngStream::kShuffle, 0, 1));
  CHECK(derive_seed(root, RngStream::kShuffle, 1, 0) !=
        derive_seed(root, RngStream::kShuffle, 0, 1));
  CHECK(derive_seed(root, RngStream::kShuffle, 2, 3) ==
        derive_seed(root, RngStream::kShuffle, 2, 3));
}

TEST_CASE("next_double stays in [0,1) and reproduces per seed") {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = a.next_double();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(x == b.next_double());
  }
}

TEST_CASE("next_index covers the range") {
  Rng rng(3);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::size_t v = rng.next_index(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("gaussian moments are roughly standard") {
  Rng rng(11);
  const int n = 50000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_gaussian();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("sample_without_replacement is a distinct uniform subset") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto picks = rng.sample_without_replacement(10, 4);
    CHECK(picks.size() == 4);
    std::set<std::size_t> unique(picks.begin(), picks.end());
    CHECK(unique.size() == 4);
    for (const std::size_t p : picks) CHECK(p < 10);
  }
}

TEST_CASE("shuffle permutes deterministically per seed") {
  std::vector<int> a{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> b = a;
  Rng ra(9), rb(9);
  ra.shuffle(a);
  rb.shuffle(b);
  CHECK(a == b);
  std::set<int> elems(a.begin(), a.end());
  CHECK(elems.size() == 8);
}
