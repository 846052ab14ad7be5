#include "fedmm/server/run.hpp"

#include <chrono>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "fedmm/error.hpp"

namespace fedmm::server {

using ordered_json = nlohmann::ordered_json;

void validate(const FLRunConfig& cfg) {
  if (cfg.rounds < 1) throw ValidationError("run: rounds must be at least 1");
  if (cfg.per_round < 1) throw ValidationError("run: clients per round must be at least 1");
  if (cfg.eval_every < 1) throw ValidationError("run: eval_every must be at least 1");
  client::validate(cfg.local);
  client::validate(cfg.reg);
}

RunResult run_rounds(const FLRunConfig& cfg, const model::BaseWeights& base,
                     const model::AdapterDelta& initial, const partition::ClientPartition& partition,
                     const data::DatasetManifest& train, const data::DatasetManifest& test) {
  validate(cfg);
  if (cfg.per_round > partition.client_count()) {
    throw ValidationError("run: clients per round exceeds client count");
  }
  if (test.modalities != train.modalities || test.class_count != train.class_count) {
    throw ValidationError("run: test manifest disagrees with training modalities or classes");
  }
  const auto sizes = partition.sizes();
  // Training batches hold only the clients' own samples; test labels are read
  // by evaluate() alone.
  std::vector<std::optional<client::ClientData>> client_data(partition.client_count());

  RunResult result{{}, make_server_state(cfg.aggregator, cfg.hyper, initial)};
  for (std::uint64_t t = 1; t <= cfg.rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto chosen = sample_clients(sizes, cfg.per_round, t, cfg.seed);
    RoundRecord record;
    record.round = t;
    std::vector<model::AdapterDelta> deltas;
    std::vector<std::size_t> chosen_sizes;
    for (auto k : chosen) {
      if (!client_data[k]) client_data[k] = client::make_client_data(train, partition, k);
      auto local = client::local_train(base, result.state.global, *client_data[k], cfg.local, cfg.reg, t);
      if (local.warning && result.log.warnings.empty()) result.log.warnings.push_back(*local.warning);
      record.clients.push_back({k, sizes[k], local.beta, local.gamma, local.epoch_loss});
      deltas.push_back(std::move(local.delta));
      chosen_sizes.push_back(sizes[k]);
    }
    const auto pg = pseudo_gradient(deltas, chosen_sizes, result.state.global);
    result.state = server_step(result.state, pg);
    if (t % cfg.eval_every == 0 || t == cfg.rounds) {
      record.eval = metrics::evaluate(base, result.state.global, test, cfg.metric);
    }
    if (cfg.log_timing) {
      record.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.rounds.push_back(std::move(record));
  }
  return result;
}

void write_run_log(std::ostream& out, const RunLog& log) {
  for (const auto& r : log.rounds) {
    ordered_json j;
    j["round"] = r.round;
    ordered_json ids = ordered_json::array();
    ordered_json n = ordered_json::object();
    ordered_json beta = ordered_json::object();
    ordered_json gamma = ordered_json::object();
    ordered_json loss = ordered_json::object();
    for (const auto& c : r.clients) {
      const auto key = std::to_string(c.client);
      ids.push_back(c.client);
      n[key] = c.samples;
      beta[key] = c.beta;
      gamma[key] = c.gamma;
      loss[key] = c.epoch_loss;
    }
    j["clients"] = std::move(ids);
    j["n"] = std::move(n);
    j["beta"] = std::move(beta);
    j["gamma"] = std::move(gamma);
    j["client_loss"] = std::move(loss);
    if (r.eval) {
      j["eval"] = ordered_json{{"metric", r.eval->metric}, {"value", r.eval->value}, {"accuracy", r.eval->accuracy}};
    }
    if (r.wall_ms) j["wall_ms"] = *r.wall_ms;
    out << j.dump() << '\n';
  }
}

void save_run_log(const std::filesystem::path& path, const RunLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write run log " + path.string());
  write_run_log(out, log);
}

BaselineResult local_baseline(const model::BaseWeights& base, const model::AdapterDelta& initial,
                              const partition::ClientPartition& partition, const data::DatasetManifest& train,
                              const data::DatasetManifest& test, client::LocalTrainConfig local,
                              metrics::MetricKind metric, std::size_t epochs) {
  local.epochs = epochs;
  client::RegularizerConfig no_reg;
  no_reg.enabled = false;
  BaselineResult out;
  for (std::size_t k = 0; k < partition.client_count(); ++k) {
    if (partition.clients[k].empty()) {
      out.skipped.push_back(k);
      continue;
    }
    const auto data = client::make_client_data(train, partition, k);
    const auto trained = client::local_train(base, initial, data, local, no_reg, 0);
    out.clients.push_back(k);
    out.per_client.push_back(metrics::evaluate(base, trained.delta, test, metric));
  }
  if (out.per_client.empty()) throw ValidationError("local_baseline: every client is empty");
  for (const auto& e : out.per_client) {
    out.mean_value += e.value;
    out.mean_accuracy += e.accuracy;
  }
  out.mean_value /= static_cast<double>(out.per_client.size());
  out.mean_accuracy /= static_cast<double>(out.per_client.size());
  return out;
}

void write_baseline_json(std::ostream& out, const BaselineResult& result) {
  ordered_json j;
  ordered_json clients = ordered_json::array();
  for (std::size_t i = 0; i < result.clients.size(); ++i) {
    const auto& e = result.per_client[i];
    clients.push_back(ordered_json{{"client", result.clients[i]},
                                   {"metric", e.metric},
                                   {"value", e.value},
                                   {"accuracy", e.accuracy}});
  }
  j["clients"] = std::move(clients);
  j["mean_value"] = result.mean_value;
  j["mean_accuracy"] = result.mean_accuracy;
  j["skipped"] = result.skipped;
  out << j.dump() << '\n';
}

}  // namespace fedmm::server
