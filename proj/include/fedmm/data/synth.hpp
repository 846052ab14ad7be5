#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedmm/data/manifest.hpp"

namespace fedmm::data {

struct SynthConfig {
  int class_count = 4;
  std::vector<std::string> modality_names{"image", "text"};
  std::vector<std::size_t> modality_dims{16, 16};
  std::size_t samples_per_class = 100;
  // Spread of class centroids, one per modality (a single value applies to all).
  std::vector<double> centroid_scale{1.0};
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);

// Class-conditional Gaussian blobs per modality. Centroids depend only on the
// seed; per-sample noise is drawn from a stream keyed by (seed, split), so the
// train and test draws share centroids and differ in noise.
DatasetManifest synth_generate(const SynthConfig& cfg, Split split = Split::train);

// Centroid mu[c][m] as used by synth_generate.
std::vector<std::vector<std::vector<double>>> synth_centroids(const SynthConfig& cfg);

}  // namespace fedmm::data
