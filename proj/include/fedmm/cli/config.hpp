#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fedmm/client/local_train.hpp"
#include "fedmm/data/synth.hpp"
#include "fedmm/metrics/metrics.hpp"
#include "fedmm/model/model.hpp"
#include "fedmm/partition/partition.hpp"
#include "fedmm/promptgen/promptgen.hpp"
#include "fedmm/server/run.hpp"

namespace fedmm::cli {

// Flat key/value configuration.
//
//   file    := { line }
//   line    := blank | comment | entry
//   comment := '#' text
//   entry   := key ws* '=' ws* value      (value runs to end of line, trimmed)
//   key     := section '.' name | name
//
// Lists are comma separated. Every key has a default (see default_config());
// unknown keys are rejected.
class ConfigMap {
 public:
  ConfigMap();  // all defaults

  static ConfigMap parse(std::istream& in);
  static ConfigMap load(const std::filesystem::path& path);

  // Accepts "key=value".
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;

  // Every key, sorted, one per line; parsing it back gives the same map.
  void write(std::ostream& out) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

const std::map<std::string, std::string>& default_config();

enum class DataSource { synth, manifest };

struct ExperimentConfig {
  DataSource source = DataSource::synth;
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  data::SynthConfig synth;
  std::size_t test_samples_per_class = 50;
  partition::ScenarioSpec scenario;
  model::ModelConfig model;
  server::FLRunConfig fl;
  std::size_t baseline_epochs = 5;
  promptgen::TaskSpec task;
  bool agnostic = true;
  metrics::MetricKind metric = metrics::MetricKind::macro_f1;
  bool metric_auto = true;
  std::filesystem::path output;
  std::uint64_t seed = 0;
  std::string run_id;
};

// Typed view; derives every sub-stream seed from the master seed with
// derive_seed(seed, purpose). Throws ValidationError / ParseError.
ExperimentConfig resolve(const ConfigMap& map);

std::vector<std::string> split_list(const std::string& value);

}  // namespace fedmm::cli
