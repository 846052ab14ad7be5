#include "fedmm/client/schedule.hpp"

#include <cmath>
#include <numbers>

#include "fedmm/error.hpp"

namespace fedmm::client {

std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio) {
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) {
    throw ValidationError("cosine_lr: warmup_ratio outside [0, 1]");
  }
  auto w = static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
  // Keep at least one decay step so the peak stays reachable.
  return w >= total_steps ? total_steps - 1 : w;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double warmup_ratio, double lr0) {
  if (total_steps == 0) throw ValidationError("cosine_lr: total_steps must be positive");
  if (step >= total_steps) throw ValidationError("cosine_lr: step out of range");
  const std::size_t warm = warmup_steps(total_steps, warmup_ratio);
  if (step < warm) return lr0 * static_cast<double>(step) / static_cast<double>(warm);
  const double progress =
      static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace fedmm::client
