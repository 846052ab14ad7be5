#include "fedmm/model/adapter.hpp"

#include <algorithm>

#include "fedmm/error.hpp"

namespace fedmm::model {

std::size_t AdapterDelta::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.B.size() + l.A.size());
  return n;
}

std::size_t AdapterDelta::depth_count() const {
  std::size_t d = 0;
  for (const auto& l : layers) d = std::max(d, l.depth + 1);
  return d;
}

bool AdapterDelta::same_shape(const AdapterDelta& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.B.rows() != b.B.rows() || a.B.cols() != b.B.cols() || a.A.rows() != b.A.rows() ||
        a.A.cols() != b.A.cols() || a.depth != b.depth) {
      return false;
    }
  }
  return true;
}

AdapterDelta AdapterDelta::zeros_like() const {
  AdapterDelta out = *this;
  for (auto& l : out.layers) {
    l.B.setZero();
    l.A.setZero();
  }
  return out;
}

std::vector<double> AdapterDelta::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.B.rows(); ++r)
      for (Eigen::Index c = 0; c < l.B.cols(); ++c) out.push_back(l.B(r, c));
    for (Eigen::Index r = 0; r < l.A.rows(); ++r)
      for (Eigen::Index c = 0; c < l.A.cols(); ++c) out.push_back(l.A(r, c));
  }
  return out;
}

void AdapterDelta::assign(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ValidationError("adapter assign: expected " + std::to_string(parameter_count()) +
                          " values, got " + std::to_string(values.size()));
  }
  std::size_t i = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.B.rows(); ++r)
      for (Eigen::Index c = 0; c < l.B.cols(); ++c) l.B(r, c) = values[i++];
    for (Eigen::Index r = 0; r < l.A.rows(); ++r)
      for (Eigen::Index c = 0; c < l.A.cols(); ++c) l.A(r, c) = values[i++];
  }
}

bool operator==(const AdapterDelta& a, const AdapterDelta& b) {
  if (a.scale != b.scale || !a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].name != b.layers[i].name) return false;
    if (a.layers[i].B != b.layers[i].B || a.layers[i].A != b.layers[i].A) return false;
  }
  return true;
}

Matrix compose_delta(const AdapterDelta& delta, std::size_t layer) {
  const auto& l = delta.layers.at(layer);
  return delta.scale * (l.B * l.A);
}

}  // namespace fedmm::model
