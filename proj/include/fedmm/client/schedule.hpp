#pragma once

#include <cstddef>

namespace fedmm::client {

// Linear warmup over ceil(warmup_ratio * total_steps) steps, then half-cosine
// decay to zero. During warmup lr = lr0 * step / warmup_steps, so the peak lr0
// is reached exactly once, at step == warmup_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, double warmup_ratio, double lr0);

std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio);

}  // namespace fedmm::client
