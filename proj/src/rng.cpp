#include "fedmm/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedmm {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
constexpr double kTwoPow53 = 9007199254740992.0;
}  // namespace

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return splitmix64_mix(key_ + counter_ * kGoldenGamma);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) / kTwoPow53; }

double Rng::uniform_open_low() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) / kTwoPow53;
}

double Rng::normal() {
  double u1 = uniform_open_low();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be positive");
  if (shape < 1.0) {
    double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open_low(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform_open_low();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("index range must be nonempty");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  // Largest multiple of range that fits; reject draws above it.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range + 1) % range;
  for (;;) {
    std::uint64_t x = next_u64();
    if (x <= limit) return static_cast<std::size_t>(x % range);
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  std::uint64_t z = splitmix64_mix(master ^ h);
  z = splitmix64_mix(z + kGoldenGamma * (a + 1));
  z = splitmix64_mix(z + kGoldenGamma * (b + 1) * 3);
  return z;
}

std::vector<double> dirichlet(Rng& rng, double alpha, std::size_t k) {
  std::vector<double> p(k);
  double total = 0.0;
  for (auto& x : p) {
    x = rng.gamma(alpha);
    total += x;
  }
  if (total > 0.0) {
    for (auto& x : p) x /= total;
  } else {
    // Every gamma underflowed; put the mass on one uniformly chosen coordinate.
    p[rng.index(k)] = 1.0;
  }
  return p;
}

}  // namespace fedmm
