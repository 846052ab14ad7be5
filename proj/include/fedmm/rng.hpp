#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace fedmm {

// Counter-based random stream. The n-th 64-bit draw is
// splitmix64_mix(key + n * golden_gamma), so a stream is fully described by
// its key and position and is bit-stable across platforms. All derived
// variates use fixed algorithms rather than <random> distributions, whose
// output is implementation defined:
//   uniform  : top 53 bits / 2^53
//   normal   : Box-Muller, cosine branch only, one normal per two uniforms
//   gamma    : Marsaglia-Tsang squeeze; shape < 1 via the U^(1/a) boost
//   index(n) : rejection on the top bits (unbiased)
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  // [0, 1)
  double uniform();
  // (0, 1]
  double uniform_open_low();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  double gamma(double shape);
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // Fisher-Yates from the back.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

// Labeled seed derivation: mixes FNV-1a(label) with the master seed and two
// coordinates (typically round and client). Adding a new label never shifts
// an existing stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// Draw from Dirichlet(alpha * 1_k) by normalized gammas.
std::vector<double> dirichlet(Rng& rng, double alpha, std::size_t k);

}  // namespace fedmm
