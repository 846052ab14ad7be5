#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedmm/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated multimodal learning simulator"};
  app.require_subcommand(1, 1);

  std::string config;
  std::vector<std::string> overrides;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"partition", "Build the client partition and per-client count table"},
      {"train", "Run federated rounds; writes run_log.jsonl and checkpoints"},
      {"baseline", "Train every client alone (Local baseline)"},
      {"export-instructions", "Write per-client instruction records"},
      {"report", "Collect finished runs under the output directory into report.csv"},
      {"sweep", "Train every point of the sweep.* grid"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config, "Key/value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "Override a config key (key=value)");
  }
  CLI11_PARSE(app, argc, argv);

  const auto* chosen = app.get_subcommands().front();
  return fedmm::cli::run(chosen->get_name(), config, overrides, std::cout, std::cerr);
}
