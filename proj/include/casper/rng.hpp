#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace casper {

// splitmix64 finalizer; used to derive independent seeds from a root seed.
std::uint64_t mix64(std::uint64_t x);

// Named sub-streams of a run's root seed. Every consumer of randomness owns
// one stream so that disabling a feature never shifts another stream's draws.
enum class RngStream : std::uint64_t {
  kDataset = 1,
  kModelInit = 2,
  kShuffle = 3,
  kReservoir = 4,
  kReplayDraw = 5,
  kCasperSample = 6,
};

// seed -> stream -> (counter...) chain: each argument is mixed in turn, so
// derive(s, kShuffle, task, epoch) gives a distinct, reproducible seed per
// (task, epoch) pair.
std::uint64_t derive_seed(std::uint64_t root, RngStream stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

/// Deterministic random generator: mt19937_64 engine plus portable
/// distribution helpers (the std:: distributions are not bit-stable across
/// standard libraries, these are).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double();

  /// Uniform integer in [0, n), n >= 1. Multiply-shift; bias < 2^-64 * n.
  std::size_t next_index(std::size_t n);

  /// Standard normal via Box-Muller (pairs cached).
  double next_gaussian();

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_index(i)]);
    }
  }

  /// First `count` entries of a Fisher-Yates pass over [0, n): a uniform
  /// sample without replacement, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t count);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace casper
