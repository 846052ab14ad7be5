#include "fedmm/client/local_train.hpp"

#include <cmath>
#include <numeric>

#include "fedmm/client/schedule.hpp"
#include "fedmm/error.hpp"
#include "fedmm/rng.hpp"

namespace fedmm::client {

void validate(const LocalTrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ValidationError("local: batch_size must be positive");
  if (!(cfg.lr0 >= 0.0)) throw ValidationError("local: lr0 must be nonnegative");
  if (!(cfg.warmup_ratio >= 0.0 && cfg.warmup_ratio <= 1.0)) {
    throw ValidationError("local: warmup_ratio outside [0, 1]");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ValidationError("local: optimizer betas outside [0, 1)");
  }
  if (!(cfg.eps > 0.0)) throw ValidationError("local: eps must be positive");
}

ClientData make_client_data(const data::DatasetManifest& manifest,
                            const partition::ClientPartition& partition, std::size_t client) {
  ClientData out;
  out.client_id = client;
  out.slot = partition.clients.at(client);
  out.batch = model::make_batch(manifest, out.slot);
  out.modalities = manifest.modality_count();
  return out;
}

LocalResult local_train(const model::BaseWeights& base, const model::AdapterDelta& global_delta,
                        const ClientData& data, const LocalTrainConfig& cfg,
                        const RegularizerConfig& reg, std::uint64_t round) {
  validate(cfg);
  validate(reg);
  if (data.slot.empty() || data.batch.size() == 0) {
    throw ValidationError("local_train: client " + std::to_string(data.client_id) + " is empty");
  }
  LocalResult out;
  out.delta = global_delta;
  out.beta = partition::client_missing_rate(data.slot, data.modalities);
  out.kind = partition::classify_client(data.slot);
  out.gamma = reg.enabled ? gamma_for_client(reg.gamma_max, out.kind, out.beta) : 0.0;

  std::optional<RegContext> ctx;
  if (out.gamma > 0.0) {
    auto mask = mask_vector(base.config.depth(), reg.margin);
    out.warning = mask.warning;
    ctx = make_reg_context(global_delta, std::move(mask.bits), out.gamma);
  }

  const std::size_t n = data.batch.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;
  if (total_steps == 0) return out;

  std::vector<double> params = out.delta.flatten();
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  Rng rng(derive_seed(cfg.seed, "client.minibatch", data.client_id, round));
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const auto mini = data.batch.rows(std::span<const std::size_t>(order.data() + start, stop - start));
      out.delta.assign(params);
      const auto lg = model::loss_and_grad(base, out.delta, mini, ctx ? &*ctx : nullptr);
      epoch_loss += lg.loss;

      const auto grad = lg.grad.flatten();
      const double lr = cosine_lr(step, total_steps, cfg.warmup_ratio, cfg.lr0);
      const double t = static_cast<double>(step + 1);
      const double bc1 = 1.0 - std::pow(cfg.beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * params[i]);
      }
    }
    out.epoch_loss.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
  }
  out.delta.assign(params);
  return out;
}

}  // namespace fedmm::client
