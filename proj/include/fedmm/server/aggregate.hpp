#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedmm/model/adapter.hpp"

namespace fedmm::server {

using model::AdapterDelta;

enum class AggregatorKind { plain_avg, avgm, adam, yogi, adagrad };

const char* to_string(AggregatorKind kind);
AggregatorKind parse_aggregator(const std::string& s);

struct ServerHyper {
  double eta = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
  double momentum = 0.9;

  friend bool operator==(const ServerHyper&, const ServerHyper&) = default;
};

// Defaults per kind: eta 1.0 for avgm, 0.01 for the adaptive kinds.
ServerHyper default_hyper(AggregatorKind kind);

struct ServerState {
  AggregatorKind kind = AggregatorKind::adam;
  ServerHyper hyper;
  AdapterDelta global;
  std::vector<double> m;         // first moment (adam, yogi)
  std::vector<double> v;         // second moment (adam, yogi, adagrad)
  std::vector<double> momentum;  // avgm buffer
  std::uint64_t round = 0;
};

ServerState make_server_state(AggregatorKind kind, const ServerHyper& hyper, AdapterDelta initial);

// Uniform without replacement among clients with nonzero size; sorted ids.
std::vector<std::size_t> sample_clients(std::span<const std::size_t> client_sizes, std::size_t per_round,
                                        std::uint64_t round, std::uint64_t seed);

// sum_k (n_k / sum n) * (w_k - w_g), flattened in AdapterDelta::flatten order.
std::vector<double> pseudo_gradient(std::span<const AdapterDelta> client_deltas,
                                    std::span<const std::size_t> client_sizes,
                                    const AdapterDelta& global);

// Aggregation weights n_k / sum n.
std::vector<double> aggregation_weights(std::span<const std::size_t> client_sizes);

// Pure: returns the advanced state. No bias correction.
ServerState server_step(const ServerState& state, std::span<const double> delta);

// Binary checkpoint in the tensor-file container; bit-exact round trip.
void save_server_state(const std::filesystem::path& path, const ServerState& state);
ServerState load_server_state(const std::filesystem::path& path);

}  // namespace fedmm::server
