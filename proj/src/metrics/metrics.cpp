#include "fedmm/metrics/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedmm/error.hpp"

namespace fedmm::metrics {

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::roc_auc: return "roc_auc";
    case MetricKind::macro_f1: return "macro_f1";
    case MetricKind::accuracy: return "accuracy";
  }
  return "?";
}

MetricKind parse_metric(const std::string& s) {
  if (s == "roc_auc" || s == "auc") return MetricKind::roc_auc;
  if (s == "macro_f1" || s == "f1") return MetricKind::macro_f1;
  if (s == "accuracy") return MetricKind::accuracy;
  throw ParseError("unknown metric '" + s + "'");
}

MetricKind default_metric(int class_count) {
  return class_count == 2 ? MetricKind::roc_auc : MetricKind::macro_f1;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("roc_auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("roc_auc: labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0) throw ValidationError("roc_auc: no positive samples (class 1 missing)");
  if (neg == 0) throw ValidationError("roc_auc: no negative samples (class 0 missing)");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) rank_sum += avg;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

F1Result macro_f1(std::span<const int> predictions, std::span<const int> labels, int class_count) {
  if (predictions.size() != labels.size()) throw ValidationError("macro_f1: length mismatch");
  if (predictions.empty()) throw ValidationError("macro_f1: empty input");
  if (class_count < 1) throw ValidationError("macro_f1: class_count must be positive");
  const auto c = static_cast<std::size_t>(class_count);
  std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if (p < 0 || p >= class_count || y < 0 || y >= class_count) throw ValidationError("macro_f1: class out of range");
    if (p == y) {
      ++tp[static_cast<std::size_t>(y)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(y)];
    }
  }
  F1Result out;
  out.per_class.resize(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    // 2PR/(P+R) = 2TP/(2TP+FP+FN), and 0 when TP = 0.
    const double denom = static_cast<double>(2 * tp[k] + fp[k] + fn[k]);
    out.per_class[k] = tp[k] == 0 ? 0.0 : 2.0 * static_cast<double>(tp[k]) / denom;
  }
  out.macro = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) / static_cast<double>(c);
  return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ValidationError("accuracy: length mismatch");
  if (labels.empty()) throw ValidationError("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

EvalResult evaluate(const model::BaseWeights& base, const model::AdapterDelta& delta,
                    const data::DatasetManifest& test, MetricKind kind) {
  const auto batch = model::make_batch(test);
  const auto probs = model::softmax(model::forward(base, delta, batch));
  std::vector<int> predictions(batch.size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    probs.row(i).maxCoeff(&arg);
    predictions[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  EvalResult out;
  out.metric = to_string(kind);
  out.count = batch.size();
  out.accuracy = accuracy(predictions, batch.labels);
  switch (kind) {
    case MetricKind::roc_auc: {
      if (probs.cols() != 2) throw ValidationError("evaluate: roc_auc needs a binary task");
      std::vector<double> scores(batch.size());
      for (Eigen::Index i = 0; i < probs.rows(); ++i) scores[static_cast<std::size_t>(i)] = probs(i, 1);
      out.value = roc_auc(scores, batch.labels);
      break;
    }
    case MetricKind::macro_f1: {
      auto f1 = macro_f1(predictions, batch.labels, base.config.class_count);
      out.value = f1.macro;
      out.per_class_f1 = std::move(f1.per_class);
      break;
    }
    case MetricKind::accuracy:
      out.value = out.accuracy;
      break;
  }
  return out;
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "run_id,scenario,level,aggregator,metric,value,seed\n";
  for (const auto& r : rows) {
    std::ostringstream value;
    value << std::setprecision(17) << r.value;
    out << r.run_id << ',' << r.scenario << ',' << r.level << ',' << r.aggregator << ',' << r.metric << ','
        << value.str() << ',' << r.seed << '\n';
  }
}

void save_report_csv(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report " + path.string());
  write_report_csv(out, rows);
}

}  // namespace fedmm::metrics
