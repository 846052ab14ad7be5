#include "fedmm/data/manifest.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedmm/error.hpp"

namespace fedmm::data {

using ordered_json = nlohmann::ordered_json;

PresenceMask::PresenceMask(std::size_t modalities, bool all_present) : size_(modalities) {
  if (modalities > 32) throw ValidationError("at most 32 modalities are supported");
  if (all_present) bits_ = modalities == 32 ? ~0U : ((1U << modalities) - 1U);
}

PresenceMask PresenceMask::from_bits(std::size_t modalities, std::uint32_t bits) {
  PresenceMask mask(modalities, false);
  PresenceMask full(modalities, true);
  mask.bits_ = bits & full.bits_;
  return mask;
}

void PresenceMask::set(std::size_t m, bool present) {
  if (m >= size_) throw ValidationError("modality index out of range");
  if (present) {
    bits_ |= (1U << m);
  } else {
    bits_ &= ~(1U << m);
  }
}

std::size_t PresenceMask::count() const { return static_cast<std::size_t>(std::popcount(bits_)); }

bool PresenceMask::full() const { return *this == PresenceMask(size_, true); }

bool PresenceMask::subset_of(const PresenceMask& other) const {
  return size_ == other.size_ && (bits_ & ~other.bits_) == 0;
}

PresenceMask Sample::presence() const {
  PresenceMask mask(features.size(), false);
  for (std::size_t m = 0; m < features.size(); ++m) mask.set(m, features[m].has_value());
  return mask;
}

const char* to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ParseError("unknown split '" + s + "'");
}

std::optional<std::size_t> DatasetManifest::modality_index(const std::string& name) const {
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    if (modalities[m].name == name) return m;
  }
  return std::nullopt;
}

std::unordered_map<std::string, std::size_t> DatasetManifest::id_index() const {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) index.emplace(samples[i].id, i);
  return index;
}

void validate(const DatasetManifest& manifest) {
  if (manifest.modalities.empty()) throw ValidationError("manifest declares no modalities");
  if (manifest.modalities.size() > 32) throw ValidationError("at most 32 modalities are supported");
  if (manifest.class_count < 1) throw ValidationError("class_count must be at least 1");
  std::set<std::string> names;
  for (const auto& mod : manifest.modalities) {
    if (mod.dim < 1) throw ValidationError("modality '" + mod.name + "' has dim 0");
    if (!names.insert(mod.name).second) {
      throw ValidationError("duplicate modality name '" + mod.name + "'");
    }
  }
  std::set<std::string> ids;
  for (const auto& s : manifest.samples) {
    if (!ids.insert(s.id).second) throw ValidationError("sample " + s.id + ": duplicate id");
    if (s.label < 0 || s.label >= manifest.class_count) {
      throw ValidationError("sample " + s.id + ": label " + std::to_string(s.label) +
                            " out of range");
    }
    if (s.features.size() != manifest.modalities.size()) {
      throw ValidationError("sample " + s.id + ": modality slot count mismatch");
    }
    bool any = false;
    for (std::size_t m = 0; m < s.features.size(); ++m) {
      if (!s.features[m]) continue;
      any = true;
      const auto& v = *s.features[m];
      if (v.size() != manifest.modalities[m].dim) {
        throw ValidationError("sample " + s.id + ": modality '" + manifest.modalities[m].name +
                              "' has " + std::to_string(v.size()) + " values, expected " +
                              std::to_string(manifest.modalities[m].dim));
      }
      for (double x : v) {
        if (!std::isfinite(x)) {
          throw ValidationError("sample " + s.id + ": non-finite feature value");
        }
      }
    }
    if (!any) throw ValidationError("sample " + s.id + ": all modalities absent");
  }
}

namespace {

ordered_json header_json(const DatasetManifest& manifest) {
  ordered_json mods = ordered_json::array();
  for (const auto& mod : manifest.modalities) {
    mods.push_back(ordered_json{{"name", mod.name}, {"dim", mod.dim}});
  }
  ordered_json header;
  header["modalities"] = std::move(mods);
  header["class_count"] = manifest.class_count;
  header["split"] = to_string(manifest.split);
  return header;
}

ordered_json sample_json(const DatasetManifest& manifest, const Sample& s) {
  ordered_json rec;
  rec["id"] = s.id;
  rec["label"] = s.label;
  ordered_json feats = ordered_json::object();
  for (std::size_t m = 0; m < manifest.modalities.size(); ++m) {
    if (s.features[m]) feats[manifest.modalities[m].name] = *s.features[m];
  }
  rec["features"] = std::move(feats);
  if (s.text) rec["text"] = *s.text;
  if (s.image) rec["image"] = *s.image;
  return rec;
}

}  // namespace

DatasetManifest parse_manifest(std::istream& in) {
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        for (const auto& mod : rec.at("modalities")) {
          manifest.modalities.push_back({mod.at("name").get<std::string>(),
                                         mod.at("dim").get<std::size_t>()});
        }
        manifest.class_count = rec.at("class_count").get<int>();
        manifest.split = parse_split(rec.value("split", std::string("train")));
        have_header = true;
        continue;
      }
      Sample s;
      s.id = rec.at("id").get<std::string>();
      s.label = rec.at("label").get<int>();
      s.features.resize(manifest.modalities.size());
      const auto& feats = rec.at("features");
      for (auto it = feats.begin(); it != feats.end(); ++it) {
        auto m = manifest.modality_index(it.key());
        if (!m) {
          throw ParseError("manifest line " + std::to_string(line_no) + ": sample " + s.id +
                           " has unknown modality '" + it.key() + "'");
        }
        s.features[*m] = it.value().get<std::vector<double>>();
      }
      if (rec.contains("text")) s.text = rec.at("text").get<std::string>();
      if (rec.contains("image")) s.image = rec.at("image").get<std::string>();
      manifest.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError("manifest is missing its header line");
  validate(manifest);
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
  out << header_json(manifest).dump() << '\n';
  for (const auto& s : manifest.samples) out << sample_json(manifest, s).dump() << '\n';
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  write_manifest(out, manifest);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace fedmm::data
