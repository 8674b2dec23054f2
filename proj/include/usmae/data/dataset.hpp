#pragma once

#include <span>
#include <vector>

#include "usmae/data/image.hpp"
#include "usmae/data/manifest.hpp"
#include "usmae/ndgrad/tensor.hpp"

namespace usmae::data {

// Grayscale view of a record's image; color (P6) files are de-annotated.
GrayImage load_image(const SampleRecord& record);

// resize_normalize(load_image(...)) for each selected record.
std::vector<ndgrad::Tensor> load_tensors(const std::vector<SampleRecord>& records,
                                         std::span<const std::size_t> indices, std::size_t size);

std::vector<int> class_labels(const std::vector<SampleRecord>& records,
                              std::span<const std::size_t> indices, std::size_t num_classes);

std::vector<std::size_t> all_indices(std::size_t n);

}  // namespace usmae::data
