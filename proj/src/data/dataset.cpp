#include "usmae/data/dataset.hpp"

#include <numeric>

#include "usmae/data/preprocess.hpp"

namespace usmae::data {

GrayImage load_image(const SampleRecord& record) {
  if (is_color_pnm(record.path)) return deannotate(read_rgb(record.path));
  return read_gray(record.path);
}

std::vector<ndgrad::Tensor> load_tensors(const std::vector<SampleRecord>& records,
                                         std::span<const std::size_t> indices, std::size_t size) {
  std::vector<ndgrad::Tensor> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(resize_normalize(load_image(records.at(i)), size));
  return out;
}

std::vector<int> class_labels(const std::vector<SampleRecord>& records,
                              std::span<const std::size_t> indices, std::size_t num_classes) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(class_index(records.at(i).label, num_classes));
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace usmae::data
