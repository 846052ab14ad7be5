#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedmm/data/manifest.hpp"
#include "fedmm/partition/partition.hpp"

namespace fedmm::promptgen {

// Main-text layout has a {text} slot and one option per line; the generic
// layout puts the options right after "Options:" and has no text slot.
enum class Layout { hateful_memes, generic };

struct TaskOption {
  char letter = 'A';
  std::string label;
};

struct TaskSpec {
  std::string question;
  std::vector<TaskOption> options;  // index == class label
  std::string tail =
      "Answer with the option's letter from the given choices directly and only give the best option. "
      "The best answer is:";
  Layout layout = Layout::hateful_memes;
};

void validate(const TaskSpec& task);

TaskSpec hateful_memes_task();
// Generic preset for an arbitrary label set; options get letters A, B, ...
TaskSpec generic_task(std::string question, const std::vector<std::string>& labels);

struct Turn {
  std::string role;
  std::string content;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct InstructionRecord {
  std::string id;
  std::optional<std::string> image;
  std::vector<Turn> conversations;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

inline constexpr const char* kAgnosticClause = ", without considering the modality";

// `mask` selects the modalities the sample is seen with; modalities named
// "text" and "image" drive the {text} slot and the image path.
std::string user_content(const data::Sample& sample, const data::PresenceMask& mask,
                         const data::DatasetManifest& manifest, const TaskSpec& task, bool agnostic);

InstructionRecord format_record(const data::Sample& sample, const data::PresenceMask& mask,
                                const data::DatasetManifest& manifest, const TaskSpec& task, bool agnostic);

// One JSON object, keys in the order id, image, conversations.
std::string record_to_json(const InstructionRecord& record);
InstructionRecord record_from_json(const std::string& line);

// Writes client_<k>.jsonl for every client, empty ones included. Returns the
// number of files written.
std::size_t export_partition(const partition::ClientPartition& partition, const data::DatasetManifest& manifest,
                             const TaskSpec& task, bool agnostic, const std::filesystem::path& out_dir);

}  // namespace fedmm::promptgen
