#include "usmae/vitmae/patch.hpp"

#include <string>

#include "usmae/errors.hpp"

namespace usmae::vitmae {

namespace {

void check_geometry(std::size_t image_size, std::size_t patch_size) {
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
    throw ShapeError("image size " + std::to_string(image_size) +
                     " is not divisible into patches of " + std::to_string(patch_size));
  }
}

}  // namespace

std::vector<std::size_t> patch_index(std::size_t image_size, std::size_t patch_size) {
  check_geometry(image_size, patch_size);
  const std::size_t grid = image_size / patch_size;
  std::vector<std::size_t> index;
  index.reserve(image_size * image_size);
  for (std::size_t gr = 0; gr < grid; ++gr)
    for (std::size_t gc = 0; gc < grid; ++gc)
      for (std::size_t i = 0; i < patch_size; ++i)
        for (std::size_t j = 0; j < patch_size; ++j)
          index.push_back((gr * patch_size + i) * image_size + gc * patch_size + j);
  return index;
}

std::vector<std::size_t> unpatch_index(std::size_t image_size, std::size_t patch_size) {
  const auto fwd = patch_index(image_size, patch_size);
  std::vector<std::size_t> inv(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) inv[fwd[i]] = i;
  return inv;
}

template <class T>
ndgrad::BasicTensor<T> patchify(const ndgrad::BasicTensor<T>& image, std::size_t patch_size) {
  if (image.rank() != 3 || image.dim(0) != 1 || image.dim(1) != image.dim(2)) {
    throw ShapeError("patchify expects a square [1,H,W] image, got " +
                     ndgrad::shape_string(image.dims()));
  }
  const std::size_t size = image.dim(1);
  const auto index = patch_index(size, patch_size);
  const std::size_t grid = size / patch_size;
  return ndgrad::take(image, index, {grid * grid, patch_size * patch_size});
}

template <class T>
ndgrad::BasicTensor<T> unpatchify(const ndgrad::BasicTensor<T>& patches, std::size_t image_size,
                                  std::size_t patch_size) {
  check_geometry(image_size, patch_size);
  const std::size_t grid = image_size / patch_size;
  if (patches.rank() != 2 || patches.dim(0) != grid * grid ||
      patches.dim(1) != patch_size * patch_size) {
    throw ShapeError("unpatchify: " + ndgrad::shape_string(patches.dims()) +
                     " does not tile a " + std::to_string(image_size) + " image with patch " +
                     std::to_string(patch_size));
  }
  const auto index = unpatch_index(image_size, patch_size);
  return ndgrad::take(patches, index, {1, image_size, image_size});
}

template ndgrad::BasicTensor<float> patchify(const ndgrad::BasicTensor<float>&, std::size_t);
template ndgrad::BasicTensor<double> patchify(const ndgrad::BasicTensor<double>&, std::size_t);
template ndgrad::BasicTensor<float> unpatchify(const ndgrad::BasicTensor<float>&, std::size_t,
                                               std::size_t);
template ndgrad::BasicTensor<double> unpatchify(const ndgrad::BasicTensor<double>&, std::size_t,
                                                std::size_t);

}  // namespace usmae::vitmae
