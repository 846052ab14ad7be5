#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedmm/client/local_train.hpp"
#include "fedmm/client/regularizer.hpp"
#include "fedmm/metrics/metrics.hpp"
#include "fedmm/server/aggregate.hpp"

namespace fedmm::server {

struct FLRunConfig {
  std::size_t rounds = 50;
  std::size_t per_round = 2;
  AggregatorKind aggregator = AggregatorKind::adam;
  ServerHyper hyper = default_hyper(AggregatorKind::adam);
  client::LocalTrainConfig local;
  client::RegularizerConfig reg;
  metrics::MetricKind metric = metrics::MetricKind::macro_f1;
  std::size_t eval_every = 1;  // the final round is always evaluated
  std::uint64_t seed = 0;      // client sampling stream
  bool log_timing = false;     // wall_ms breaks byte-identical logs when on
};

void validate(const FLRunConfig& cfg);

struct ClientRoundRecord {
  std::size_t client = 0;
  std::size_t samples = 0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<double> epoch_loss;
};

struct RoundRecord {
  std::uint64_t round = 0;
  std::vector<ClientRoundRecord> clients;
  std::optional<metrics::EvalResult> eval;
  std::optional<double> wall_ms;
};

struct RunLog {
  std::vector<RoundRecord> rounds;
  std::vector<std::string> warnings;
};

struct RunResult {
  RunLog log;
  ServerState state;
};

RunResult run_rounds(const FLRunConfig& cfg, const model::BaseWeights& base,
                     const model::AdapterDelta& initial, const partition::ClientPartition& partition,
                     const data::DatasetManifest& train, const data::DatasetManifest& test);

// One JSON object per round:
// {"round","clients","n","beta","gamma","client_loss","eval":{"metric","value","accuracy"},"wall_ms"}
void write_run_log(std::ostream& out, const RunLog& log);
void save_run_log(const std::filesystem::path& path, const RunLog& log);

struct BaselineResult {
  std::vector<std::size_t> clients;
  std::vector<metrics::EvalResult> per_client;
  double mean_value = 0.0;
  double mean_accuracy = 0.0;
  std::vector<std::size_t> skipped;  // empty clients
};

// Every nonempty client trains alone from `initial` without regularization and
// is evaluated on the shared test set; means are unweighted.
BaselineResult local_baseline(const model::BaseWeights& base, const model::AdapterDelta& initial,
                              const partition::ClientPartition& partition, const data::DatasetManifest& train,
                              const data::DatasetManifest& test, client::LocalTrainConfig local,
                              metrics::MetricKind metric, std::size_t epochs = 5);

void write_baseline_json(std::ostream& out, const BaselineResult& result);

}  // namespace fedmm::server
