#include "fedmm/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fedmm/data/stats.hpp"
#include "fedmm/data/synth.hpp"
#include "fedmm/error.hpp"
#include "fedmm/model/checkpoint.hpp"

namespace fedmm::cli {

namespace fs = std::filesystem;

namespace {

std::string format_number(double x) {
  std::ostringstream ss;
  ss << x;
  return ss.str();
}

void write_snapshot(const fs::path& dir, ConfigMap map, const ExperimentConfig& cfg) {
  map.set("output", cfg.output.string());
  std::ofstream out(dir / "config.resolved", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "config.resolved").string());
  out << "# resolved configuration; rerun with: fedmm <command> --config config.resolved\n";
  map.write(out);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

struct Prepared {
  ExperimentConfig cfg;
  LoadedData data;
  partition::ClientPartition partition;
};

Prepared prepare(const ConfigMap& map) {
  Prepared p{resolve(map), {}, {}};
  p.data = load_data(p.cfg);
  p.cfg.model.modality_dims.clear();
  for (const auto& mod : p.data.train.modalities) p.cfg.model.modality_dims.push_back(mod.dim);
  p.cfg.model.class_count = p.data.train.class_count;
  if (p.cfg.metric_auto) {
    p.cfg.metric = metrics::default_metric(p.data.train.class_count);
    p.cfg.fl.metric = p.cfg.metric;
  }
  p.partition = partition::build_scenario(p.data.train, p.cfg.scenario);
  partition::validate(p.partition, p.data.train);
  return p;
}

void write_partition_outputs(const Prepared& p, const fs::path& dir) {
  partition::save_partition(dir / "partition.json", p.cfg.scenario, p.partition);
  data::save_count_csv(dir / "counts.csv", data::modality_stats(p.partition, p.data.train));
}

int cmd_partition(const ConfigMap& map, std::ostream& out) {
  auto p = prepare(map);
  ensure_dir(p.cfg.output);
  write_partition_outputs(p, p.cfg.output);
  write_snapshot(p.cfg.output, map, p.cfg);
  out << "partition: " << p.partition.client_count() << " clients, " << p.data.train.samples.size()
      << " samples -> " << p.cfg.output.string() << '\n';
  return 0;
}

void train_into(const ConfigMap& map, const fs::path& dir, std::ostream& out) {
  auto p = prepare(map);
  p.cfg.output = dir;
  ensure_dir(dir);
  write_partition_outputs(p, dir);
  const auto [base, initial] = model::init_model(p.cfg.model);
  const auto result = server::run_rounds(p.cfg.fl, base, initial, p.partition, p.data.train, p.data.test);
  server::save_run_log(dir / "run_log.jsonl", result.log);
  model::save_adapter(dir / "global_adapter.ckpt", result.state.global);
  server::save_server_state(dir / "server_state.ckpt", result.state);
  write_snapshot(dir, map, p.cfg);
  for (const auto& w : result.log.warnings) out << "warning: " << w << '\n';
  const auto& last = result.log.rounds.back();
  out << "train: " << p.cfg.fl.rounds << " rounds, " << server::to_string(p.cfg.fl.aggregator) << ", final "
      << last.eval->metric << " = " << last.eval->value << " (accuracy " << last.eval->accuracy << ") -> "
      << dir.string() << '\n';
}

int cmd_train(const ConfigMap& map, std::ostream& out) {
  const auto cfg = resolve(map);
  train_into(map, cfg.output, out);
  return 0;
}

int cmd_baseline(const ConfigMap& map, std::ostream& out) {
  auto p = prepare(map);
  ensure_dir(p.cfg.output);
  const auto [base, initial] = model::init_model(p.cfg.model);
  const auto result = server::local_baseline(base, initial, p.partition, p.data.train, p.data.test, p.cfg.fl.local,
                                             p.cfg.metric, p.cfg.baseline_epochs);
  std::ofstream f(p.cfg.output / "baseline.json", std::ios::binary);
  if (!f) throw IoError("cannot write baseline.json");
  server::write_baseline_json(f, result);
  write_snapshot(p.cfg.output, map, p.cfg);
  out << "baseline: " << result.per_client.size() << " clients, mean " << metrics::to_string(p.cfg.metric) << " = "
      << result.mean_value << " (accuracy " << result.mean_accuracy << ")\n";
  return 0;
}

int cmd_export(const ConfigMap& map, std::ostream& out) {
  auto p = prepare(map);
  const auto dir = p.cfg.output / "instructions";
  const auto files = promptgen::export_partition(p.partition, p.data.train, p.cfg.task, p.cfg.agnostic, dir);
  write_snapshot(p.cfg.output, map, p.cfg);
  out << "export-instructions: " << files << " files -> " << dir.string() << '\n';
  return 0;
}

std::vector<metrics::ReportRow> collect_rows(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (fs::exists(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == "config.resolved") {
        dirs.push_back(entry.path().parent_path());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<metrics::ReportRow> rows;
  for (const auto& dir : dirs) {
    const auto map = ConfigMap::load(dir / "config.resolved");
    const auto cfg = resolve(map);
    const std::string run_id = cfg.run_id.empty() ? fs::relative(dir, root).generic_string() : cfg.run_id;
    metrics::ReportRow row{run_id, partition::to_string(cfg.scenario.kind), level_label(cfg.scenario),
                           server::to_string(cfg.fl.aggregator), "", 0.0, cfg.seed};
    if (fs::exists(dir / "run_log.jsonl")) {
      std::ifstream in(dir / "run_log.jsonl");
      std::string line, last_eval;
      while (std::getline(in, line)) {
        if (line.find("\"eval\"") != std::string::npos) last_eval = line;
      }
      if (last_eval.empty()) continue;
      const auto j = nlohmann::json::parse(last_eval);
      row.metric = j.at("eval").at("metric").get<std::string>();
      row.value = j.at("eval").at("value").get<double>();
      rows.push_back(row);
    }
    if (fs::exists(dir / "baseline.json")) {
      std::ifstream in(dir / "baseline.json");
      const auto j = nlohmann::json::parse(in);
      row.aggregator = "local";
      row.metric = j.at("clients").at(0).at("metric").get<std::string>();
      row.value = j.at("mean_value").get<double>();
      rows.push_back(row);
    }
  }
  return rows;
}

int cmd_report(const ConfigMap& map, std::ostream& out) {
  const auto cfg = resolve(map);
  const auto rows = collect_rows(cfg.output);
  ensure_dir(cfg.output);
  metrics::save_report_csv(cfg.output / "report.csv", rows);
  metrics::write_report_csv(out, rows);
  return 0;
}

int cmd_sweep(const ConfigMap& map, std::ostream& out) {
  const auto cfg = resolve(map);
  const std::vector<std::pair<std::string, std::string>> axes = {
      {"sweep.alpha", "scenario.alpha"},       {"sweep.beta", "scenario.beta"},
      {"sweep.image_only_clients", "scenario.image_only_clients"},
      {"sweep.keep_prob", "scenario.keep_prob"}, {"sweep.aggregator", "fl.aggregator"},
      {"sweep.seed", "seed"},
  };
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const auto& [sweep_key, target] : axes) {
    auto values = split_list(map.get(sweep_key));
    if (!values.empty()) grid.emplace_back(target, std::move(values));
  }
  if (grid.empty()) throw ValidationError("sweep: no sweep.* axis is set");

  std::size_t runs = 0;
  std::function<void(std::size_t, ConfigMap, std::string)> walk = [&](std::size_t axis, ConfigMap entry,
                                                                        std::string name) {
    if (axis == grid.size()) {
      for (const auto& [sweep_key, target] : axes) entry.set(sweep_key, "");
      entry.set("run_id", name);
      train_into(entry, cfg.output / name, out);
      ++runs;
      return;
    }
    const auto& [key, values] = grid[axis];
    for (const auto& v : values) {
      ConfigMap next = entry;
      next.set(key, v);
      const auto short_key = key.substr(key.find('.') + 1);
      walk(axis + 1, next, name + (name.empty() ? "" : "_") + short_key + "-" + v);
    }
  };
  walk(0, map, "");
  out << "sweep: " << runs << " runs -> " << cfg.output.string() << '\n';
  return 0;
}

}  // namespace

LoadedData load_data(const ExperimentConfig& cfg) {
  LoadedData d;
  if (cfg.source == DataSource::synth) {
    d.train = data::synth_generate(cfg.synth, data::Split::train);
    auto test_cfg = cfg.synth;
    test_cfg.samples_per_class = cfg.test_samples_per_class;
    d.test = data::synth_generate(test_cfg, data::Split::test);
  } else {
    d.train = data::load_manifest(cfg.train_manifest);
    d.test = data::load_manifest(cfg.test_manifest);
    if (d.test.modalities != d.train.modalities || d.test.class_count != d.train.class_count) {
      throw ValidationError("test manifest disagrees with the training manifest");
    }
  }
  return d;
}

std::string level_label(const partition::ScenarioSpec& spec) {
  switch (spec.kind) {
    case partition::ScenarioKind::aligned: return "alpha=" + format_number(spec.alpha);
    case partition::ScenarioKind::missing: return "beta=" + format_number(*spec.beta);
    case partition::ScenarioKind::cross: {
      const auto image = *spec.image_only_clients;
      return "I-" + std::to_string(image) + ":T-" + std::to_string(spec.clients - image);
    }
    case partition::ScenarioKind::hybrid: return "p=" + format_number(*spec.keep_prob);
  }
  return "";
}

int run(const std::string& subcommand, ConfigMap map, std::ostream& out, std::ostream& err) {
  try {
    if (subcommand == "partition") return cmd_partition(map, out);
    if (subcommand == "train") return cmd_train(map, out);
    if (subcommand == "baseline") return cmd_baseline(map, out);
    if (subcommand == "export-instructions") return cmd_export(map, out);
    if (subcommand == "report") return cmd_report(map, out);
    if (subcommand == "sweep") return cmd_sweep(map, out);
    err << "fedmm: unknown subcommand '" << subcommand << "'\n";
    return 2;
  } catch (const std::exception& e) {
    err << "fedmm " << subcommand << ": " << e.what() << '\n';
    return 1;
  }
}

int run(const std::string& subcommand, const fs::path& config_path, const std::vector<std::string>& overrides,
        std::ostream& out, std::ostream& err) {
  ConfigMap map;
  try {
    if (!config_path.empty()) map = ConfigMap::load(config_path);
    for (const auto& o : overrides) map.apply_override(o);
  } catch (const std::exception& e) {
    err << "fedmm " << subcommand << ": " << e.what() << '\n';
    return 1;
  }
  return run(subcommand, std::move(map), out, err);
}

}  // namespace fedmm::cli
