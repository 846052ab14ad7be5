#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedmm/cli/config.hpp"

namespace fedmm::cli {

// Subcommands: partition, train, baseline, export-instructions, report, sweep.
// Returns a process exit status; diagnostics go to `err`.
int run(const std::string& subcommand, const std::filesystem::path& config_path,
        const std::vector<std::string>& overrides, std::ostream& out, std::ostream& err);

// Same, starting from an in-memory map (no config file).
int run(const std::string& subcommand, ConfigMap map, std::ostream& out, std::ostream& err);

struct LoadedData {
  data::DatasetManifest train;
  data::DatasetManifest test;
};

LoadedData load_data(const ExperimentConfig& cfg);

// Scenario level label used in reports: alpha, beta, I-a:T-b or p.
std::string level_label(const partition::ScenarioSpec& spec);

}  // namespace fedmm::cli
