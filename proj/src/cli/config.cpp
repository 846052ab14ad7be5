#include "fedmm/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedmm/error.hpp"
#include "fedmm/rng.hpp"

namespace fedmm::cli {

const std::map<std::string, std::string>& default_config() {
  static const std::map<std::string, std::string> defaults = {
      {"seed", "0"},
      {"output", ""},
      {"run_id", ""},
      {"metric", "auto"},
      {"data.source", "synth"},
      {"data.train", ""},
      {"data.test", ""},
      {"synth.classes", "4"},
      {"synth.names", "image,text"},
      {"synth.dims", "16,16"},
      {"synth.samples_per_class", "100"},
      {"synth.test_samples_per_class", "50"},
      {"synth.centroid_scale", "1.0"},
      {"synth.noise", "1.0"},
      {"scenario.kind", "aligned"},
      {"scenario.alpha", "0.5"},
      {"scenario.beta", "0.3"},
      {"scenario.image_only_clients", "3"},
      {"scenario.keep_prob", "0.8"},
      {"scenario.clients", "10"},
      {"model.hidden", "32"},
      {"model.encoder_depth", "3"},
      {"model.trunk_depth", "4"},
      {"model.rank", "4"},
      {"model.alpha", "4"},
      {"fl.rounds", "50"},
      {"fl.per_round", "2"},
      {"fl.aggregator", "adam"},
      {"fl.eta", "auto"},
      {"fl.beta1", "0.9"},
      {"fl.beta2", "0.99"},
      {"fl.tau", "0.001"},
      {"fl.momentum", "0.9"},
      {"fl.eval_every", "1"},
      {"fl.log_timing", "false"},
      {"local.epochs", "1"},
      {"local.batch_size", "16"},
      {"local.lr", "0.01"},
      {"local.warmup_ratio", "0.01"},
      {"local.beta1", "0.9"},
      {"local.beta2", "0.999"},
      {"local.eps", "1e-08"},
      {"local.weight_decay", "0"},
      {"baseline.epochs", "5"},
      {"reg.enabled", "false"},
      {"reg.gamma_max", "0.1"},
      {"reg.margin", "1"},
      {"prompt.task", "hateful_memes"},
      {"prompt.question", ""},
      {"prompt.labels", ""},
      {"prompt.agnostic", "true"},
      {"sweep.alpha", ""},
      {"sweep.beta", ""},
      {"sweep.image_only_clients", ""},
      {"sweep.keep_prob", ""},
      {"sweep.aggregator", ""},
      {"sweep.seed", ""},
  };
  return defaults;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const ConfigMap& map, const std::string& key) {
  const auto& v = map.get(key);
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("config: " + key + " = '" + v + "' is not a number");
  }
}

std::uint64_t to_u64(const ConfigMap& map, const std::string& key) {
  const auto& v = map.get(key);
  try {
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    std::size_t used = 0;
    auto x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("config: " + key + " = '" + v + "' is not a nonnegative integer");
  }
}

std::size_t to_size(const ConfigMap& map, const std::string& key) { return static_cast<std::size_t>(to_u64(map, key)); }

bool to_bool(const ConfigMap& map, const std::string& key) {
  const auto& v = map.get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("config: " + key + " = '" + v + "' is not a boolean");
}

}  // namespace

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ConfigMap::ConfigMap() : entries_(default_config()) {}

ConfigMap ConfigMap::parse(std::istream& in) {
  ConfigMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    map.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return map;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse(in);
}

void ConfigMap::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ParseError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ParseError("config: unknown key '" + key + "'");
  it->second = value;
}

const std::string& ConfigMap::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ParseError("config: unknown key '" + key + "'");
  return it->second;
}

bool ConfigMap::has(const std::string& key) const { return entries_.count(key) != 0; }

void ConfigMap::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
}

ExperimentConfig resolve(const ConfigMap& map) {
  ExperimentConfig cfg;
  cfg.seed = to_u64(map, "seed");
  cfg.run_id = map.get("run_id");
  if (!map.get("output").empty()) {
    cfg.output = map.get("output");
  } else if (const char* env = std::getenv("FEDMM_OUT"); env != nullptr && *env != '\0') {
    cfg.output = env;
  } else {
    cfg.output = "runs";
  }

  const auto& source = map.get("data.source");
  if (source == "synth") {
    cfg.source = DataSource::synth;
  } else if (source == "manifest") {
    cfg.source = DataSource::manifest;
    cfg.train_manifest = map.get("data.train");
    cfg.test_manifest = map.get("data.test");
    if (cfg.train_manifest.empty() || cfg.test_manifest.empty()) {
      throw ValidationError("config: data.source = manifest needs data.train and data.test");
    }
  } else {
    throw ParseError("config: data.source must be synth or manifest");
  }

  auto& s = cfg.synth;
  s.class_count = static_cast<int>(to_size(map, "synth.classes"));
  s.modality_names = split_list(map.get("synth.names"));
  s.modality_dims.clear();
  for (const auto& d : split_list(map.get("synth.dims"))) s.modality_dims.push_back(std::stoul(d));
  s.samples_per_class = to_size(map, "synth.samples_per_class");
  s.centroid_scale.clear();
  for (const auto& c : split_list(map.get("synth.centroid_scale"))) s.centroid_scale.push_back(std::stod(c));
  s.noise_scale = to_double(map, "synth.noise");
  s.seed = derive_seed(cfg.seed, "synth");
  cfg.test_samples_per_class = to_size(map, "synth.test_samples_per_class");
  if (cfg.source == DataSource::synth) data::validate(s);

  auto& sc = cfg.scenario;
  sc.kind = partition::parse_scenario_kind(map.get("scenario.kind"));
  sc.alpha = to_double(map, "scenario.alpha");
  sc.clients = to_size(map, "scenario.clients");
  sc.seed = derive_seed(cfg.seed, "partition");
  if (sc.kind == partition::ScenarioKind::missing) sc.beta = to_double(map, "scenario.beta");
  if (sc.kind == partition::ScenarioKind::cross) sc.image_only_clients = to_size(map, "scenario.image_only_clients");
  if (sc.kind == partition::ScenarioKind::hybrid) sc.keep_prob = to_double(map, "scenario.keep_prob");
  partition::validate(sc);

  auto& m = cfg.model;
  m.hidden = to_size(map, "model.hidden");
  m.encoder_depth = to_size(map, "model.encoder_depth");
  m.trunk_depth = to_size(map, "model.trunk_depth");
  m.rank = to_size(map, "model.rank");
  m.alpha_lora = to_double(map, "model.alpha");
  m.seed = derive_seed(cfg.seed, "model");
  // modality_dims and class_count are filled from the data at run time.
  m.modality_dims = s.modality_dims;
  m.class_count = s.class_count;

  auto& fl = cfg.fl;
  fl.rounds = to_size(map, "fl.rounds");
  fl.per_round = to_size(map, "fl.per_round");
  fl.aggregator = server::parse_aggregator(map.get("fl.aggregator"));
  fl.hyper = server::default_hyper(fl.aggregator);
  if (map.get("fl.eta") != "auto") fl.hyper.eta = to_double(map, "fl.eta");
  fl.hyper.beta1 = to_double(map, "fl.beta1");
  fl.hyper.beta2 = to_double(map, "fl.beta2");
  fl.hyper.tau = to_double(map, "fl.tau");
  fl.hyper.momentum = to_double(map, "fl.momentum");
  fl.eval_every = to_size(map, "fl.eval_every");
  fl.log_timing = to_bool(map, "fl.log_timing");
  fl.seed = derive_seed(cfg.seed, "sampling");

  auto& local = fl.local;
  local.epochs = to_size(map, "local.epochs");
  local.batch_size = to_size(map, "local.batch_size");
  local.lr0 = to_double(map, "local.lr");
  local.warmup_ratio = to_double(map, "local.warmup_ratio");
  local.beta1 = to_double(map, "local.beta1");
  local.beta2 = to_double(map, "local.beta2");
  local.eps = to_double(map, "local.eps");
  local.weight_decay = to_double(map, "local.weight_decay");
  local.seed = derive_seed(cfg.seed, "local");

  fl.reg.enabled = to_bool(map, "reg.enabled");
  fl.reg.gamma_max = to_double(map, "reg.gamma_max");
  fl.reg.margin = to_size(map, "reg.margin");
  server::validate(fl);

  cfg.baseline_epochs = to_size(map, "baseline.epochs");

  const auto& metric = map.get("metric");
  cfg.metric_auto = metric == "auto";
  cfg.metric = cfg.metric_auto ? metrics::default_metric(s.class_count) : metrics::parse_metric(metric);
  fl.metric = cfg.metric;

  const auto& task = map.get("prompt.task");
  if (task == "hateful_memes") {
    cfg.task = promptgen::hateful_memes_task();
  } else if (task == "generic") {
    const auto labels = split_list(map.get("prompt.labels"));
    cfg.task = promptgen::generic_task(map.get("prompt.question"), labels);
    promptgen::validate(cfg.task);
  } else {
    throw ParseError("config: prompt.task must be hateful_memes or generic");
  }
  cfg.agnostic = to_bool(map, "prompt.agnostic");
  return cfg;
}

}  // namespace fedmm::cli
