#pragma once

#include <cstddef>
#include <vector>

#include "usmae/ndgrad/ops.hpp"

namespace usmae::vitmae {

// Flat index map from patch layout [num_patches, patch*patch] into a
// row-major size x size image. Patches are in row-major grid order and each
// row holds its patch's pixels in raster order.
std::vector<std::size_t> patch_index(std::size_t image_size, std::size_t patch_size);

// Inverse of patch_index.
std::vector<std::size_t> unpatch_index(std::size_t image_size, std::size_t patch_size);

// [1,H,W] with H == W divisible by patch_size -> [num_patches, patch_size^2].
template <class T>
ndgrad::BasicTensor<T> patchify(const ndgrad::BasicTensor<T>& image, std::size_t patch_size);

// [num_patches, patch_size^2] -> [1, image_size, image_size].
template <class T>
ndgrad::BasicTensor<T> unpatchify(const ndgrad::BasicTensor<T>& patches, std::size_t image_size,
                                  std::size_t patch_size);

}  // namespace usmae::vitmae
