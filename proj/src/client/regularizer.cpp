#include "fedmm/client/regularizer.hpp"

#include <cmath>

#include "fedmm/error.hpp"

namespace fedmm::client {

void validate(const RegularizerConfig& cfg) {
  if (!(cfg.gamma_max >= 0.0)) throw ValidationError("regularizer: gamma_max must be nonnegative");
}

LayerMask mask_vector(std::size_t depth, std::size_t margin) {
  if (depth < 1) throw ValidationError("mask_vector: depth must be positive");
  LayerMask out;
  out.bits.assign(depth, false);
  if (2 * margin >= depth) {
    out.warning = "layer mask margin " + std::to_string(margin) + " covers all " +
                  std::to_string(depth) + " depth indices; no layer is regularized";
    return out;
  }
  for (std::size_t d = margin; d < depth - margin; ++d) out.bits[d] = true;
  return out;
}

double gamma_for_client(double gamma_max, partition::ClientKind kind, double beta_k) {
  if (!(beta_k >= 0.0 && beta_k <= 1.0)) throw ValidationError("gamma_for_client: beta outside [0, 1]");
  switch (kind) {
    case partition::ClientKind::aligned: return 0.0;
    case partition::ClientKind::single_modality: return gamma_max;
    case partition::ClientKind::partial_missing: return gamma_max * beta_k;
  }
  return 0.0;
}

RegContext make_reg_context(const AdapterDelta& global, std::vector<bool> mask, double gamma) {
  RegContext ctx;
  ctx.target.reserve(global.layers.size());
  for (std::size_t l = 0; l < global.layers.size(); ++l) {
    ctx.target.push_back(model::compose_delta(global, l));
  }
  ctx.mask = std::move(mask);
  ctx.gamma = gamma;
  return ctx;
}

RegResult reg_value_and_grad(const AdapterDelta& delta, const RegContext& ctx) {
  if (ctx.target.size() != delta.layers.size()) {
    throw ValidationError("regularizer: layer count mismatch");
  }
  RegResult out;
  out.grad = delta.zeros_like();
  for (std::size_t l = 0; l < delta.layers.size(); ++l) {
    const auto& layer = delta.layers[l];
    if (layer.depth >= ctx.mask.size()) throw ValidationError("regularizer: mask shorter than depth");
    if (!ctx.mask[layer.depth] || ctx.gamma == 0.0) continue;
    const Matrix composed = model::compose_delta(delta, l);
    if (composed.rows() != ctx.target[l].rows() || composed.cols() != ctx.target[l].cols()) {
      throw ValidationError("regularizer: shape mismatch in layer " + layer.name);
    }
    const Matrix diff = composed - ctx.target[l];
    out.value += ctx.gamma * diff.squaredNorm();
    const double c = 2.0 * ctx.gamma * delta.scale;
    out.grad.layers[l].B = c * diff * layer.A.transpose();
    out.grad.layers[l].A = c * layer.B.transpose() * diff;
  }
  return out;
}

}  // namespace fedmm::client
