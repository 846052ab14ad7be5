#include "fedmm/partition/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "fedmm/error.hpp"
#include "fedmm/rng.hpp"

namespace fedmm::partition {

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::aligned: return "aligned";
    case ScenarioKind::missing: return "missing";
    case ScenarioKind::cross: return "cross";
    case ScenarioKind::hybrid: return "hybrid";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "aligned") return ScenarioKind::aligned;
  if (s == "missing") return ScenarioKind::missing;
  if (s == "cross") return ScenarioKind::cross;
  if (s == "hybrid") return ScenarioKind::hybrid;
  throw ParseError("unknown scenario kind '" + s + "'");
}

const char* to_string(ClientKind kind) {
  switch (kind) {
    case ClientKind::aligned: return "aligned";
    case ClientKind::partial_missing: return "partial_missing";
    case ClientKind::single_modality: return "single_modality";
  }
  return "?";
}

void validate(const ScenarioSpec& spec) {
  if (!(spec.alpha > 0.0)) throw ValidationError("scenario: alpha must be positive");
  if (spec.clients < 1) throw ValidationError("scenario: need at least one client");
  const bool is_missing = spec.kind == ScenarioKind::missing;
  const bool is_cross = spec.kind == ScenarioKind::cross;
  const bool is_hybrid = spec.kind == ScenarioKind::hybrid;
  if (spec.beta.has_value() != is_missing) {
    throw ValidationError("scenario: beta is required for, and only for, the missing kind");
  }
  if (spec.image_only_clients.has_value() != is_cross) {
    throw ValidationError(
        "scenario: image_only_clients is required for, and only for, the cross kind");
  }
  if (spec.keep_prob.has_value() != is_hybrid) {
    throw ValidationError("scenario: keep_prob is required for, and only for, the hybrid kind");
  }
  if (is_missing && !(*spec.beta >= 0.0 && *spec.beta <= 1.0)) {
    throw ValidationError("scenario: beta must lie in [0, 1]");
  }
  if (is_hybrid && !(*spec.keep_prob >= 0.0 && *spec.keep_prob <= 1.0)) {
    throw ValidationError("scenario: keep_prob must lie in [0, 1]");
  }
  if (is_cross && *spec.image_only_clients > spec.clients) {
    throw ValidationError("scenario: image_only_clients exceeds client count");
  }
}

std::vector<std::size_t> ClientPartition::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(c.size());
  return out;
}

void validate(const ClientPartition& partition, const DatasetManifest& manifest) {
  const auto index = manifest.id_index();
  std::vector<bool> seen(manifest.samples.size(), false);
  for (std::size_t k = 0; k < partition.clients.size(); ++k) {
    for (const auto& a : partition.clients[k].samples) {
      auto it = index.find(a.sample_id);
      if (it == index.end()) throw ValidationError("partition: dangling sample id " + a.sample_id);
      if (seen[it->second]) {
        throw ValidationError("partition: sample " + a.sample_id + " assigned twice");
      }
      seen[it->second] = true;
      if (!a.mask.any()) throw ValidationError("partition: sample " + a.sample_id + " has empty mask");
      if (!a.mask.subset_of(manifest.samples[it->second].presence())) {
        throw ValidationError("partition: sample " + a.sample_id +
                              " mask exceeds manifest presence");
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw ValidationError("partition: sample " + manifest.samples[i].id + " unassigned");
  }
}

std::vector<std::size_t> largest_remainder(const std::vector<double>& proportions,
                                           std::size_t total) {
  const std::size_t k = proportions.size();
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> frac(k, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = proportions[i] * static_cast<double>(total);
    const double floor = std::floor(exact);
    counts[i] = static_cast<std::size_t>(floor);
    frac[i] = exact - floor;
    assigned += counts[i];
  }
  // Floating error can overshoot by a unit when proportions sum slightly above 1.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % k) {
    ++counts[order[i]];
    ++assigned;
  }
  return counts;
}

ClientPartition dirichlet_partition(const DatasetManifest& manifest, std::size_t clients,
                                    double alpha, std::uint64_t seed) {
  if (clients < 1) throw ValidationError("dirichlet_partition: need at least one client");
  if (!(alpha > 0.0)) throw ValidationError("dirichlet_partition: alpha must be positive");
  if (manifest.samples.empty()) throw ValidationError("dirichlet_partition: empty manifest");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(manifest.class_count));
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    by_class.at(static_cast<std::size_t>(manifest.samples[i].label)).push_back(i);
  }

  ClientPartition out;
  out.clients.resize(clients);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    Rng rng(derive_seed(seed, "partition.dirichlet", c));
    const auto proportions = dirichlet(rng, alpha, clients);
    rng.shuffle(members);
    const auto counts = largest_remainder(proportions, members.size());
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < clients; ++k) {
      for (std::size_t j = 0; j < counts[k]; ++j, ++cursor) {
        const auto& s = manifest.samples[members[cursor]];
        out.clients[k].samples.push_back({s.id, s.presence()});
      }
    }
  }
  return out;
}

namespace {

void require_aligned(const ClientPartition& partition, const char* op) {
  for (const auto& client : partition.clients) {
    for (const auto& a : client.samples) {
      if (!a.mask.full()) {
        throw ValidationError(std::string(op) + ": input must be fully aligned (sample " +
                              a.sample_id + ")");
      }
    }
  }
}

std::size_t modality_count(const ClientPartition& partition) {
  for (const auto& client : partition.clients) {
    if (!client.empty()) return client.samples.front().mask.size();
  }
  return 0;
}

}  // namespace

ClientPartition apply_missing(const ClientPartition& aligned, double beta, std::uint64_t seed) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("apply_missing: beta outside [0, 1]");
  require_aligned(aligned, "apply_missing");
  ClientPartition out = aligned;
  Rng rng(derive_seed(seed, "partition.missing"));
  for (auto& client : out.clients) {
    for (auto& a : client.samples) {
      const std::size_t modalities = a.mask.size();
      for (std::size_t m = 0; m < modalities; ++m) {
        if (rng.bernoulli(beta)) a.mask.set(m, false);
      }
      if (!a.mask.any()) a.mask.set(rng.index(modalities), true);
    }
  }
  return out;
}

ClientPartition apply_cross(const ClientPartition& aligned, std::size_t image_only_clients,
                            std::uint64_t seed) {
  const std::size_t clients = aligned.client_count();
  if (image_only_clients > clients) {
    throw ValidationError("apply_cross: image_only_clients exceeds client count");
  }
  const std::size_t modalities = modality_count(aligned);
  if (modalities != 0 && modalities != 2) {
    throw ValidationError("apply_cross: requires exactly two modalities");
  }
  require_aligned(aligned, "apply_cross");

  std::vector<std::size_t> order(clients);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "partition.cross"));
  rng.shuffle(order);
  std::vector<bool> image_only(clients, false);
  for (std::size_t i = 0; i < image_only_clients; ++i) image_only[order[i]] = true;

  ClientPartition out = aligned;
  for (std::size_t k = 0; k < clients; ++k) {
    const auto keep = PresenceMask::from_bits(2, image_only[k] ? 0b01U : 0b10U);
    for (auto& a : out.clients[k].samples) a.mask = keep;
  }
  return out;
}

ClientPartition apply_hybrid(const ClientPartition& aligned, double keep_prob,
                             std::uint64_t seed) {
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
    throw ValidationError("apply_hybrid: keep_prob outside [0, 1]");
  }
  require_aligned(aligned, "apply_hybrid");
  const std::size_t modalities = modality_count(aligned);
  ClientPartition out = aligned;
  Rng rng(derive_seed(seed, "partition.hybrid"));
  // Draws are made for every client, empty ones included, so a client's
  // outcome depends only on its index.
  const std::size_t draw_width = modalities == 0 ? 2 : modalities;
  for (auto& client : out.clients) {
    PresenceMask keep(draw_width, false);
    for (std::size_t m = 0; m < draw_width; ++m) keep.set(m, rng.bernoulli(keep_prob));
    if (!keep.any()) keep.set(rng.index(draw_width), true);
    for (auto& a : client.samples) a.mask = keep;
  }
  return out;
}

ClientPartition build_scenario(const DatasetManifest& manifest, const ScenarioSpec& spec) {
  validate(spec);
  auto base = dirichlet_partition(manifest, spec.clients, spec.alpha, spec.seed);
  switch (spec.kind) {
    case ScenarioKind::aligned: return base;
    case ScenarioKind::missing: return apply_missing(base, *spec.beta, spec.seed);
    case ScenarioKind::cross: return apply_cross(base, *spec.image_only_clients, spec.seed);
    case ScenarioKind::hybrid: return apply_hybrid(base, *spec.keep_prob, spec.seed);
  }
  return base;
}

double client_missing_rate(const ClientSlot& client, std::size_t modalities) {
  if (client.empty()) throw ValidationError("client_missing_rate: empty client");
  if (modalities == 0) throw ValidationError("client_missing_rate: zero modalities");
  std::size_t absent = 0;
  for (const auto& a : client.samples) absent += modalities - a.mask.count();
  return static_cast<double>(absent) /
         (static_cast<double>(client.size()) * static_cast<double>(modalities));
}

ClientKind classify_client(const ClientSlot& client) {
  if (client.empty()) throw ValidationError("classify_client: empty client");
  std::uint32_t seen = 0;
  bool all_full = true;
  for (const auto& a : client.samples) {
    seen |= a.mask.bits();
    all_full = all_full && a.mask.full();
  }
  const auto& first = client.samples.front().mask;
  if (PresenceMask::from_bits(first.size(), seen) != PresenceMask(first.size(), true)) {
    return ClientKind::single_modality;
  }
  return all_full ? ClientKind::aligned : ClientKind::partial_missing;
}

}  // namespace fedmm::partition
