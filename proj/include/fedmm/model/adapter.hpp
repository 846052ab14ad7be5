#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedmm::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Low-rank pair for one affine layer: effective update scale * B * A.
struct LayerAdapter {
  std::string name;
  std::size_t depth = 0;
  Matrix B;  // fan_out x r
  Matrix A;  // r x fan_in
};

// Ordered per-layer adapters; the payload exchanged between clients and the
// server. Layer order matches BaseWeights::layers.
struct AdapterDelta {
  double scale = 1.0;  // alpha_lora / r
  std::vector<LayerAdapter> layers;

  std::size_t parameter_count() const;
  std::size_t depth_count() const;
  bool same_shape(const AdapterDelta& other) const;
  AdapterDelta zeros_like() const;

  // Row-major B then row-major A, layer by layer.
  std::vector<double> flatten() const;
  void assign(std::span<const double> values);
};

bool operator==(const AdapterDelta& a, const AdapterDelta& b);

// scale * B * A for the given layer.
Matrix compose_delta(const AdapterDelta& delta, std::size_t layer);

}  // namespace fedmm::model
