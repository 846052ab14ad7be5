#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedmm/data/manifest.hpp"
#include "fedmm/partition/partition.hpp"

namespace fedmm::data {

struct CountRow {
  std::size_t client = 0;
  int label = 0;
  std::uint32_t pattern = 0;  // presence bits, never zero
  std::size_t count = 0;
};

// Per-client sample counts by (class, presence pattern). Every client gets a
// row for each of the C * (2^M - 1) cells, zeros included.
struct CountTable {
  std::vector<std::string> modality_names;
  int class_count = 0;
  std::size_t client_count = 0;
  std::vector<CountRow> rows;

  std::size_t client_total(std::size_t client) const;
  std::string pattern_name(std::uint32_t pattern) const;
};

CountTable modality_stats(const partition::ClientPartition& partition,
                          const DatasetManifest& manifest);

// CSV with header client,class,pattern,count.
void write_count_csv(std::ostream& out, const CountTable& table);
void save_count_csv(const std::filesystem::path& path, const CountTable& table);

}  // namespace fedmm::data
