#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedmm/error.hpp"
#include "fedmm/partition/partition.hpp"

namespace fedmm::partition {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json spec_json(const ScenarioSpec& spec) {
  ordered_json j;
  j["kind"] = to_string(spec.kind);
  j["alpha"] = spec.alpha;
  if (spec.beta) j["beta"] = *spec.beta;
  if (spec.image_only_clients) j["image_only_clients"] = *spec.image_only_clients;
  if (spec.keep_prob) j["keep_prob"] = *spec.keep_prob;
  j["clients"] = spec.clients;
  j["seed"] = spec.seed;
  return j;
}

ScenarioSpec spec_from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  spec.kind = parse_scenario_kind(j.at("kind").get<std::string>());
  spec.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) spec.beta = j.at("beta").get<double>();
  if (j.contains("image_only_clients")) {
    spec.image_only_clients = j.at("image_only_clients").get<std::size_t>();
  }
  if (j.contains("keep_prob")) spec.keep_prob = j.at("keep_prob").get<double>();
  spec.clients = j.at("clients").get<std::size_t>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

}  // namespace

std::string partition_to_json(const ScenarioSpec& spec, const ClientPartition& partition) {
  ordered_json root;
  root["spec"] = spec_json(spec);
  ordered_json clients = ordered_json::array();
  for (std::size_t k = 0; k < partition.clients.size(); ++k) {
    ordered_json samples = ordered_json::array();
    for (const auto& a : partition.clients[k].samples) {
      ordered_json mask = ordered_json::array();
      for (std::size_t m = 0; m < a.mask.size(); ++m) mask.push_back(a.mask.test(m));
      samples.push_back(ordered_json{{"sid", a.sample_id}, {"mask", std::move(mask)}});
    }
    clients.push_back(ordered_json{{"id", k}, {"samples", std::move(samples)}});
  }
  root["clients"] = std::move(clients);
  return root.dump();
}

PartitionFile partition_from_json(const std::string& text) {
  PartitionFile out;
  try {
    const auto root = nlohmann::json::parse(text);
    out.spec = spec_from_json(root.at("spec"));
    const auto& clients = root.at("clients");
    out.partition.clients.resize(clients.size());
    for (const auto& c : clients) {
      const auto k = c.at("id").get<std::size_t>();
      if (k >= clients.size()) throw ParseError("partition: client id out of range");
      auto& slot = out.partition.clients[k];
      for (const auto& s : c.at("samples")) {
        const auto flags = s.at("mask").get<std::vector<bool>>();
        data::PresenceMask mask(flags.size(), false);
        for (std::size_t m = 0; m < flags.size(); ++m) mask.set(m, flags[m]);
        slot.samples.push_back({s.at("sid").get<std::string>(), mask});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("partition: ") + e.what());
  }
  return out;
}

void save_partition(const std::filesystem::path& path, const ScenarioSpec& spec,
                    const ClientPartition& partition) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write partition " + path.string());
  out << partition_to_json(spec, partition) << '\n';
}

PartitionFile load_partition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open partition " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return partition_from_json(buf.str());
}

}  // namespace fedmm::partition
