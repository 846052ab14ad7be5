#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedmm/data/manifest.hpp"

namespace fedmm::partition {

using data::DatasetManifest;
using data::PresenceMask;

enum class ScenarioKind { aligned, missing, cross, hybrid };

const char* to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::aligned;
  double alpha = 0.5;
  std::optional<double> beta;                       // missing
  std::optional<std::size_t> image_only_clients;    // cross
  std::optional<double> keep_prob;                  // hybrid
  std::size_t clients = 10;
  std::uint64_t seed = 0;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

void validate(const ScenarioSpec& spec);

struct Assignment {
  std::string sample_id;
  PresenceMask mask;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct ClientSlot {
  std::vector<Assignment> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  friend bool operator==(const ClientSlot&, const ClientSlot&) = default;
};

struct ClientPartition {
  std::vector<ClientSlot> clients;

  std::size_t client_count() const { return clients.size(); }
  std::vector<std::size_t> sizes() const;
  friend bool operator==(const ClientPartition&, const ClientPartition&) = default;
};

// Disjoint, exhaustive over the manifest, masks nonempty and within the
// manifest's own presence. Throws ValidationError.
void validate(const ClientPartition& partition, const DatasetManifest& manifest);

ClientPartition dirichlet_partition(const DatasetManifest& manifest, std::size_t clients,
                                    double alpha, std::uint64_t seed);

// Largest-remainder rounding of proportions to integer counts summing to total.
// Ties in the fractional part go to the lower index.
std::vector<std::size_t> largest_remainder(const std::vector<double>& proportions,
                                           std::size_t total);

ClientPartition apply_missing(const ClientPartition& aligned, double beta, std::uint64_t seed);
ClientPartition apply_cross(const ClientPartition& aligned, std::size_t image_only_clients,
                            std::uint64_t seed);
ClientPartition apply_hybrid(const ClientPartition& aligned, double keep_prob, std::uint64_t seed);

// Dirichlet split followed by the requested modality scenario.
ClientPartition build_scenario(const DatasetManifest& manifest, const ScenarioSpec& spec);

enum class ClientKind { aligned, partial_missing, single_modality };

const char* to_string(ClientKind kind);

// Fraction of absent modality slots over the client's samples.
double client_missing_rate(const ClientSlot& client, std::size_t modalities);
ClientKind classify_client(const ClientSlot& client);

struct PartitionFile {
  ScenarioSpec spec;
  ClientPartition partition;
};

void save_partition(const std::filesystem::path& path, const ScenarioSpec& spec,
                    const ClientPartition& partition);
PartitionFile load_partition(const std::filesystem::path& path);
std::string partition_to_json(const ScenarioSpec& spec, const ClientPartition& partition);
PartitionFile partition_from_json(const std::string& text);

}  // namespace fedmm::partition
