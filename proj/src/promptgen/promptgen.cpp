#include "fedmm/promptgen/promptgen.hpp"

#include <fstream>

#include <json.hpp>

#include "fedmm/error.hpp"

namespace fedmm::promptgen {

using ordered_json = nlohmann::ordered_json;

void validate(const TaskSpec& task) {
  if (task.options.size() < 2) throw ValidationError("task: needs at least two options");
  for (std::size_t i = 0; i < task.options.size(); ++i) {
    if (task.options[i].letter != static_cast<char>('A' + i)) {
      throw ValidationError("task: option letters must run consecutively from A");
    }
  }
}

TaskSpec hateful_memes_task() {
  TaskSpec task;
  task.question = "Is the content hateful";
  task.options = {{'A', "not-hateful"}, {'B', "hateful"}};
  task.layout = Layout::hateful_memes;
  return task;
}

TaskSpec generic_task(std::string question, const std::vector<std::string>& labels) {
  TaskSpec task;
  task.question = std::move(question);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    task.options.push_back({static_cast<char>('A' + i), labels[i]});
  }
  task.layout = Layout::generic;
  return task;
}

namespace {

std::string option_line(const TaskOption& opt) { return std::string("(") + opt.letter + ") " + opt.label; }

}  // namespace

std::string user_content(const data::Sample& sample, const data::PresenceMask& mask,
                         const data::DatasetManifest& manifest, const TaskSpec& task, bool agnostic) {
  validate(task);
  const std::string clause = agnostic ? kAgnosticClause : "";
  std::string out = "<image>\nSelect the best answer to the following multiple-choice question" + clause + ".\n";
  if (task.layout == Layout::hateful_memes) {
    std::string text;
    const auto text_slot = manifest.modality_index("text");
    if (text_slot && mask.test(*text_slot) && sample.text) text = *sample.text;
    out += text + "\n";
    out += task.question + clause + "?\nOptions:\n";
    for (const auto& opt : task.options) out += option_line(opt) + "\n";
    out += task.tail;
  } else {
    out += task.question + clause + "?\nOptions:";
    for (const auto& opt : task.options) out += "\n" + option_line(opt);
    out += " " + task.tail;
  }
  return out;
}

InstructionRecord format_record(const data::Sample& sample, const data::PresenceMask& mask,
                                const data::DatasetManifest& manifest, const TaskSpec& task, bool agnostic) {
  validate(task);
  if (sample.label < 0 || static_cast<std::size_t>(sample.label) >= task.options.size()) {
    throw ValidationError("format_record: sample " + sample.id + " has no matching option for its label");
  }
  InstructionRecord rec;
  rec.id = sample.id;
  const auto image_slot = manifest.modality_index("image");
  if (image_slot && mask.test(*image_slot) && sample.image) rec.image = *sample.image;
  rec.conversations.push_back({"user", user_content(sample, mask, manifest, task, agnostic)});
  rec.conversations.push_back({"assistant", option_line(task.options[static_cast<std::size_t>(sample.label)])});
  return rec;
}

std::string record_to_json(const InstructionRecord& record) {
  ordered_json j;
  j["id"] = record.id;
  if (record.image) j["image"] = *record.image;
  ordered_json turns = ordered_json::array();
  for (const auto& t : record.conversations) turns.push_back(ordered_json{{"role", t.role}, {"content", t.content}});
  j["conversations"] = std::move(turns);
  return j.dump();
}

InstructionRecord record_from_json(const std::string& line) {
  InstructionRecord rec;
  try {
    const auto j = nlohmann::json::parse(line);
    rec.id = j.at("id").get<std::string>();
    if (j.contains("image")) rec.image = j.at("image").get<std::string>();
    for (const auto& t : j.at("conversations")) {
      rec.conversations.push_back({t.at("role").get<std::string>(), t.at("content").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("instruction record: ") + e.what());
  }
  return rec;
}

std::size_t export_partition(const partition::ClientPartition& partition, const data::DatasetManifest& manifest,
                             const TaskSpec& task, bool agnostic, const std::filesystem::path& out_dir) {
  validate(task);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const auto index = manifest.id_index();
  std::size_t files = 0;
  for (std::size_t k = 0; k < partition.client_count(); ++k) {
    const auto path = out_dir / ("client_" + std::to_string(k) + ".jsonl");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& a : partition.clients[k].samples) {
      auto it = index.find(a.sample_id);
      if (it == index.end()) throw ValidationError("export: dangling sample id " + a.sample_id);
      out << record_to_json(format_record(manifest.samples[it->second], a.mask, manifest, task, agnostic)) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
    ++files;
  }
  return files;
}

}  // namespace fedmm::promptgen
