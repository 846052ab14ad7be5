#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedmm/client/regularizer.hpp"
#include "fedmm/model/model.hpp"
#include "fedmm/partition/partition.hpp"

namespace fedmm::client {

struct LocalTrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  double lr0 = 1e-2;
  double warmup_ratio = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

void validate(const LocalTrainConfig& cfg);

// One client's private data: the slot (for missing-rate statistics) and the
// matching batch built from its effective masks.
struct ClientData {
  std::size_t client_id = 0;
  partition::ClientSlot slot;
  model::Batch batch;
  std::size_t modalities = 0;
};

ClientData make_client_data(const data::DatasetManifest& manifest,
                            const partition::ClientPartition& partition, std::size_t client);

struct LocalResult {
  model::AdapterDelta delta;
  std::vector<double> epoch_loss;  // mean objective per epoch
  double beta = 0.0;
  double gamma = 0.0;
  partition::ClientKind kind = partition::ClientKind::aligned;
  std::optional<std::string> warning;
};

// Copies global_delta, then runs epochs * ceil(n_k / batch_size) AdamW steps
// under a per-round cosine schedule. The minibatch order is seeded by
// (cfg.seed, client, round).
LocalResult local_train(const model::BaseWeights& base, const model::AdapterDelta& global_delta,
                        const ClientData& data, const LocalTrainConfig& cfg,
                        const RegularizerConfig& reg, std::uint64_t round);

}  // namespace fedmm::client
