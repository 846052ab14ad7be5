#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fedmm/model/adapter.hpp"
#include "fedmm/partition/partition.hpp"

namespace fedmm::client {

using model::AdapterDelta;
using model::Matrix;

struct RegularizerConfig {
  double gamma_max = 0.1;
  // Unregularized layers at each end of the depth range.
  std::size_t margin = 1;
  bool enabled = false;
};

void validate(const RegularizerConfig& cfg);

struct LayerMask {
  std::vector<bool> bits;
  std::optional<std::string> warning;
};

// False for the first and last `margin` depth indices, true in between.
LayerMask mask_vector(std::size_t depth, std::size_t margin);

// 0 for aligned clients, gamma_max for single-modality clients and
// gamma_max * beta_k for partially missing ones.
double gamma_for_client(double gamma_max, partition::ClientKind kind, double beta_k);

struct RegContext {
  // Composed global update per layer (the pull target).
  std::vector<Matrix> target;
  std::vector<bool> mask;  // indexed by depth
  double gamma = 0.0;
};

RegContext make_reg_context(const AdapterDelta& global, std::vector<bool> mask, double gamma);

struct RegResult {
  double value = 0.0;
  AdapterDelta grad;
};

// gamma * sum over masked layers of ||target_l - scale*B_l*A_l||_F^2 and its
// exact gradient with respect to every B and A.
RegResult reg_value_and_grad(const AdapterDelta& delta, const RegContext& ctx);

}  // namespace fedmm::client
