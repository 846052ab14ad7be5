#include "fedmm/data/stats.hpp"

#include <fstream>
#include <ostream>

#include "fedmm/error.hpp"

namespace fedmm::data {

std::size_t CountTable::client_total(std::size_t client) const {
  std::size_t total = 0;
  for (const auto& row : rows) {
    if (row.client == client) total += row.count;
  }
  return total;
}

std::string CountTable::pattern_name(std::uint32_t pattern) const {
  std::string name;
  for (std::size_t m = 0; m < modality_names.size(); ++m) {
    if (!((pattern >> m) & 1U)) continue;
    if (!name.empty()) name += '+';
    name += modality_names[m];
  }
  return name;
}

CountTable modality_stats(const partition::ClientPartition& partition,
                          const DatasetManifest& manifest) {
  const std::size_t modalities = manifest.modality_count();
  if (modalities > 16) throw ValidationError("count table supports at most 16 modalities");
  const std::uint32_t patterns = (1U << modalities) - 1U;
  const auto classes = static_cast<std::size_t>(manifest.class_count);
  const auto index = manifest.id_index();

  CountTable table;
  for (const auto& mod : manifest.modalities) table.modality_names.push_back(mod.name);
  table.class_count = manifest.class_count;
  table.client_count = partition.client_count();

  std::vector<std::size_t> counts(partition.client_count() * classes * patterns, 0);
  for (std::size_t k = 0; k < partition.client_count(); ++k) {
    for (const auto& a : partition.clients[k].samples) {
      auto it = index.find(a.sample_id);
      if (it == index.end()) throw ValidationError("dangling sample id " + a.sample_id);
      if (!a.mask.any()) throw ValidationError("sample " + a.sample_id + ": empty mask");
      const auto label = static_cast<std::size_t>(manifest.samples[it->second].label);
      ++counts[(k * classes + label) * patterns + (a.mask.bits() - 1U)];
    }
  }
  table.rows.reserve(counts.size());
  for (std::size_t k = 0; k < partition.client_count(); ++k) {
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::uint32_t p = 1; p <= patterns; ++p) {
        table.rows.push_back(
            {k, static_cast<int>(c), p, counts[(k * classes + c) * patterns + (p - 1U)]});
      }
    }
  }
  return table;
}

void write_count_csv(std::ostream& out, const CountTable& table) {
  out << "client,class,pattern,count\n";
  for (const auto& row : table.rows) {
    out << row.client << ',' << row.label << ',' << table.pattern_name(row.pattern) << ','
        << row.count << '\n';
  }
}

void save_count_csv(const std::filesystem::path& path, const CountTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_count_csv(out, table);
}

}  // namespace fedmm::data
