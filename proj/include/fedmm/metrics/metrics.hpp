#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedmm/data/manifest.hpp"
#include "fedmm/model/model.hpp"

namespace fedmm::metrics {

enum class MetricKind { roc_auc, macro_f1, accuracy };

const char* to_string(MetricKind kind);
MetricKind parse_metric(const std::string& s);
// roc_auc for two classes, macro_f1 otherwise.
MetricKind default_metric(int class_count);

struct EvalResult {
  std::string metric;
  double value = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_class_f1;  // filled for macro_f1
  std::size_t count = 0;
};

// Mann-Whitney U / (n+ n-), ties counted one half, via average ranks.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct F1Result {
  double macro = 0.0;
  std::vector<double> per_class;
};

// One-vs-rest F1 per class (0 when precision + recall is 0), averaged over all
// C classes, absent ones included.
F1Result macro_f1(std::span<const int> predictions, std::span<const int> labels, int class_count);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

EvalResult evaluate(const model::BaseWeights& base, const model::AdapterDelta& delta,
                    const data::DatasetManifest& test, MetricKind kind);

struct ReportRow {
  std::string run_id;
  std::string scenario;
  std::string level;
  std::string aggregator;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

// CSV header run_id,scenario,level,aggregator,metric,value,seed.
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);
void save_report_csv(const std::filesystem::path& path, std::span<const ReportRow> rows);

}  // namespace fedmm::metrics
