#include "fedmm/data/synth.hpp"

#include "fedmm/error.hpp"
#include "fedmm/rng.hpp"

namespace fedmm::data {

namespace {

double centroid_scale_for(const SynthConfig& cfg, std::size_t m) {
  return cfg.centroid_scale.size() == 1 ? cfg.centroid_scale[0] : cfg.centroid_scale.at(m);
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.class_count < 1) throw ValidationError("synth: class_count must be positive");
  if (cfg.modality_dims.empty()) throw ValidationError("synth: no modalities");
  if (cfg.modality_names.size() != cfg.modality_dims.size()) {
    throw ValidationError("synth: modality names and dims differ in length");
  }
  for (auto d : cfg.modality_dims) {
    if (d < 1) throw ValidationError("synth: modality dims must be positive");
  }
  if (cfg.samples_per_class < 1) throw ValidationError("synth: samples_per_class must be positive");
  if (cfg.centroid_scale.size() != 1 && cfg.centroid_scale.size() != cfg.modality_dims.size()) {
    throw ValidationError("synth: centroid_scale needs one value or one per modality");
  }
  for (double s : cfg.centroid_scale) {
    if (!(s >= 0.0)) throw ValidationError("synth: centroid_scale must be nonnegative");
  }
  if (!(cfg.noise_scale >= 0.0)) throw ValidationError("synth: noise_scale must be nonnegative");
}

std::vector<std::vector<std::vector<double>>> synth_centroids(const SynthConfig& cfg) {
  validate(cfg);
  const std::size_t modalities = cfg.modality_dims.size();
  std::vector<std::vector<std::vector<double>>> mu(static_cast<std::size_t>(cfg.class_count));
  for (std::size_t c = 0; c < mu.size(); ++c) {
    mu[c].resize(modalities);
    for (std::size_t m = 0; m < modalities; ++m) {
      Rng rng(derive_seed(cfg.seed, "synth.centroid", c, m));
      const double s = centroid_scale_for(cfg, m);
      mu[c][m].resize(cfg.modality_dims[m]);
      for (auto& x : mu[c][m]) x = s * rng.normal();
    }
  }
  return mu;
}

DatasetManifest synth_generate(const SynthConfig& cfg, Split split) {
  const auto mu = synth_centroids(cfg);
  DatasetManifest manifest;
  for (std::size_t m = 0; m < cfg.modality_dims.size(); ++m) {
    manifest.modalities.push_back({cfg.modality_names[m], cfg.modality_dims[m]});
  }
  manifest.class_count = cfg.class_count;
  manifest.split = split;
  Rng rng(derive_seed(cfg.seed, split == Split::train ? "synth.noise.train" : "synth.noise.test"));
  const std::string prefix = split == Split::train ? "tr" : "te";
  manifest.samples.reserve(mu.size() * cfg.samples_per_class);
  for (std::size_t c = 0; c < mu.size(); ++c) {
    for (std::size_t i = 0; i < cfg.samples_per_class; ++i) {
      Sample s;
      s.id = prefix + "-" + std::to_string(c) + "-" + std::to_string(i);
      s.label = static_cast<int>(c);
      for (const auto& centroid : mu[c]) {
        std::vector<double> x(centroid.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = centroid[j] + cfg.noise_scale * rng.normal();
        s.features.emplace_back(std::move(x));
      }
      manifest.samples.push_back(std::move(s));
    }
  }
  return manifest;
}

}  // namespace fedmm::data
