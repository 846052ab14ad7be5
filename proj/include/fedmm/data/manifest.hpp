#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fedmm::data {

// Set of present modalities for one sample. Supports up to 32 modalities.
class PresenceMask {
 public:
  PresenceMask() = default;
  PresenceMask(std::size_t modalities, bool all_present);
  static PresenceMask from_bits(std::size_t modalities, std::uint32_t bits);

  bool test(std::size_t m) const { return (bits_ >> m) & 1U; }
  void set(std::size_t m, bool present);
  std::size_t size() const { return size_; }
  std::size_t count() const;
  bool any() const { return bits_ != 0; }
  bool full() const;
  bool subset_of(const PresenceMask& other) const;
  std::uint32_t bits() const { return bits_; }

  friend bool operator==(const PresenceMask&, const PresenceMask&) = default;

 private:
  std::uint32_t bits_ = 0;
  std::size_t size_ = 0;
};

struct ModalityDescriptor {
  std::string name;
  std::size_t dim = 0;

  friend bool operator==(const ModalityDescriptor&, const ModalityDescriptor&) = default;
};

struct Sample {
  std::string id;
  int label = 0;
  // One slot per modality; std::nullopt when the modality is absent.
  std::vector<std::optional<std::vector<double>>> features;
  // Raw text and image path, carried for instruction export only.
  std::optional<std::string> text;
  std::optional<std::string> image;

  PresenceMask presence() const;
  bool present(std::size_t m) const { return m < features.size() && features[m].has_value(); }

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Split { train, test };

const char* to_string(Split split);
Split parse_split(const std::string& s);

struct DatasetManifest {
  std::vector<ModalityDescriptor> modalities;
  int class_count = 0;
  std::vector<Sample> samples;
  Split split = Split::train;

  std::size_t modality_count() const { return modalities.size(); }
  // Index of the named modality, or nullopt.
  std::optional<std::size_t> modality_index(const std::string& name) const;
  // Map from sample id to position; built on demand.
  std::unordered_map<std::string, std::size_t> id_index() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Throws ValidationError naming the offending sample on any invariant breach.
void validate(const DatasetManifest& manifest);

DatasetManifest parse_manifest(std::istream& in);
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace fedmm::data
