#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "usmae/rng.hpp"

namespace usmae::vitmae {

// Random patch mask. The first num_masked entries of `permutation` are hidden;
// the remainder, in permutation order, is the encoder's visible token order.
struct MaskPlan {
  std::vector<std::uint8_t> masked;
  std::vector<std::size_t> permutation;
  std::size_t num_masked = 0;
  std::uint64_t seed = 0;

  std::size_t num_patches() const { return masked.size(); }
  std::size_t num_visible() const { return masked.size() - num_masked; }
  std::span<const std::size_t> visible_order() const {
    return std::span(permutation).subspan(num_masked);
  }
  std::span<const std::size_t> masked_order() const {
    return std::span(permutation).first(num_masked);
  }

  bool operator==(const MaskPlan&) const = default;
};

// round(mask_ratio * num_patches), halves rounded up.
std::size_t masked_count(std::size_t num_patches, double mask_ratio);

MaskPlan sample_mask(std::size_t num_patches, double mask_ratio, std::uint64_t seed);

// Draws the plan's seed from `rng`.
MaskPlan sample_mask(std::size_t num_patches, double mask_ratio, Rng& rng);

// Plan with nothing hidden and patches in natural order.
MaskPlan full_visibility(std::size_t num_patches);

}  // namespace usmae::vitmae
