#pragma once

#include <cstddef>

#include "usmae/data/image.hpp"
#include "usmae/ndgrad/tensor.hpp"

namespace usmae::data {

// A pixel counts as a colored overlay when its HSV saturation and value both
// exceed these thresholds.
struct DeannotateOptions {
  double saturation_threshold = 0.15;
  double value_threshold = 0.12;
};

// Overlay pixels of an RGB image.
GrayImage annotation_mask(const RgbImage& img, const DeannotateOptions& opts = {});

// Integer luminance (299 R + 587 G + 114 B + 500) / 1000, so gray pixels keep
// their value.
std::uint8_t luminance(const std::uint8_t* rgb);

// Luminance image with overlay pixels filled in. Fill runs in passes: every
// still-marked pixel takes the median (lower middle for even counts) of the
// unmarked pixels within Chebyshev radius r, and pixels filled in a pass
// serve as sources from the next pass on. r starts at 1 and grows only when
// a pass fills nothing. Throws ContractError when every pixel is marked.
GrayImage deannotate(const RgbImage& img, const DeannotateOptions& opts = {});

// Bilinear resample (pixel centers at +0.5, edges clamped) to size x size,
// then per-image standardization with the variance floored at 1e-6 on the
// [0,1] intensity scale. Returns [1,size,size].
ndgrad::Tensor resize_normalize(const GrayImage& img, std::size_t size);

// Bilinear resample only, on [0,1] intensities, row-major size*size.
std::vector<float> resize_bilinear(const GrayImage& img, std::size_t size);

}  // namespace usmae::data
