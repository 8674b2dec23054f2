#include "usmae/vitmae/mask.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "usmae/errors.hpp"

namespace usmae::vitmae {

std::size_t masked_count(std::size_t num_patches, double mask_ratio) {
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
    throw ContractError("mask_ratio must lie in [0, 1), got " + std::to_string(mask_ratio));
  }
  return static_cast<std::size_t>(std::llround(mask_ratio * static_cast<double>(num_patches)));
}

MaskPlan sample_mask(std::size_t num_patches, double mask_ratio, std::uint64_t seed) {
  const std::size_t count = masked_count(num_patches, mask_ratio);
  MaskPlan plan;
  plan.seed = seed;
  plan.num_masked = count;
  plan.permutation.resize(num_patches);
  std::iota(plan.permutation.begin(), plan.permutation.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(plan.permutation));
  plan.masked.assign(num_patches, 0);
  for (std::size_t i = 0; i < count; ++i) plan.masked[plan.permutation[i]] = 1;
  return plan;
}

MaskPlan sample_mask(std::size_t num_patches, double mask_ratio, Rng& rng) {
  return sample_mask(num_patches, mask_ratio, rng.next_u64());
}

MaskPlan full_visibility(std::size_t num_patches) {
  MaskPlan plan;
  plan.masked.assign(num_patches, 0);
  plan.permutation.resize(num_patches);
  std::iota(plan.permutation.begin(), plan.permutation.end(), std::size_t{0});
  return plan;
}

}  // namespace usmae::vitmae
