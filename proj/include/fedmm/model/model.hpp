#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedmm/client/regularizer.hpp"
#include "fedmm/data/manifest.hpp"
#include "fedmm/model/adapter.hpp"
#include "fedmm/partition/partition.hpp"

namespace fedmm::model {

struct ModelConfig {
  std::vector<std::size_t> modality_dims{16, 16};
  std::size_t hidden = 32;
  std::size_t encoder_depth = 3;
  std::size_t trunk_depth = 4;
  int class_count = 4;
  std::size_t rank = 4;
  double alpha_lora = 4.0;
  std::uint64_t seed = 0;

  std::size_t depth() const { return encoder_depth + trunk_depth + 1; }
  std::size_t modality_count() const { return modality_dims.size(); }
};

enum class LayerRole { encoder, trunk, head };

struct LayerSpec {
  std::string name;
  LayerRole role = LayerRole::trunk;
  std::size_t modality = 0;  // encoder layers only
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::size_t depth = 0;
};

// Layer table for a config: encoder stacks (modality-major), trunk, head.
std::vector<LayerSpec> build_layout(const ModelConfig& cfg);
void validate(const ModelConfig& cfg);

// Frozen pretrained weights. Never mutated after init_model.
struct BaseWeights {
  ModelConfig config;
  std::vector<LayerSpec> layers;
  std::vector<Matrix> weight;  // fan_out x fan_in
  std::vector<Vector> bias;    // fan_out
};

struct Batch {
  // Per modality: n x dim_m, zero rows where the modality is absent.
  std::vector<Matrix> features;
  // n x M, 1.0 where present.
  Matrix presence;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Batch rows(std::span<const std::size_t> index) const;
};

// Uses each sample's own presence.
Batch make_batch(const data::DatasetManifest& manifest);
// Uses the slot's effective masks, which may hide modalities the manifest has.
Batch make_batch(const data::DatasetManifest& manifest, const partition::ClientSlot& slot);

std::pair<BaseWeights, AdapterDelta> init_model(const ModelConfig& cfg);

// n x C logits.
Matrix forward(const BaseWeights& base, const AdapterDelta& delta, const Batch& batch);

struct LossGrad {
  double loss = 0.0;       // data loss + regularizer
  double data_loss = 0.0;  // mean softmax cross-entropy
  double reg_value = 0.0;
  AdapterDelta grad;
};

LossGrad loss_and_grad(const BaseWeights& base, const AdapterDelta& delta, const Batch& batch,
                       const client::RegContext* reg = nullptr);

// Row-wise softmax.
Matrix softmax(const Matrix& logits);

}  // namespace fedmm::model
