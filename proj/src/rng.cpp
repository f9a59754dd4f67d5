#include "casper/rng.hpp"

#include <cmath>
#include <numbers>

namespace casper {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, RngStream stream,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(root);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::next_index(std::size_t n) {
  using u128 = unsigned __int128;
  return static_cast<std::size_t>(
      (static_cast<u128>(next_u64()) * static_cast<u128>(n)) >> 64);
}

double Rng::next_gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n,
                                                         std::size_t count) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::size_t> picked;
  picked.reserve(count);
  for (std::size_t i = 0; i < count && i < n; ++i) {
    const std::size_t j = i + next_index(n - i);
    std::swap(pool[i], pool[j]);
    picked.push_back(pool[i]);
  }
  return picked;
}

}  // namespace casper
