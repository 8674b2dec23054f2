#include "usmae/data/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "usmae/errors.hpp"

namespace usmae::data {

std::uint8_t luminance(const std::uint8_t* rgb) {
  return static_cast<std::uint8_t>((299u * rgb[0] + 587u * rgb[1] + 114u * rgb[2] + 500u) / 1000u);
}

GrayImage annotation_mask(const RgbImage& img, const DeannotateOptions& opts) {
  GrayImage mask(img.width, img.height, 0);
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    const std::uint8_t* p = &img.pixels[3 * i];
    const int hi = std::max({p[0], p[1], p[2]});
    const int lo = std::min({p[0], p[1], p[2]});
    const double value = hi / 255.0;
    const double saturation = hi == 0 ? 0.0 : static_cast<double>(hi - lo) / hi;
    if (saturation > opts.saturation_threshold && value > opts.value_threshold) mask.pixels[i] = 1;
  }
  return mask;
}

GrayImage deannotate(const RgbImage& img, const DeannotateOptions& opts) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.width * img.height; ++i) out.pixels[i] = luminance(&img.pixels[3 * i]);
  GrayImage marked = annotation_mask(img, opts);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < marked.pixels.size(); ++i)
    if (marked.pixels[i]) pending.push_back(i);
  if (pending.empty()) return out;
  if (pending.size() == marked.pixels.size()) {
    throw ContractError("deannotate: every pixel is an overlay; nothing to fill from");
  }

  const auto w = static_cast<long>(img.width), h = static_cast<long>(img.height);
  long radius = 1;
  std::vector<std::uint8_t> values;
  std::vector<std::pair<std::size_t, std::uint8_t>> filled;
  while (!pending.empty()) {
    filled.clear();
    std::vector<std::size_t> still;
    for (auto idx : pending) {
      const long x = static_cast<long>(idx) % w, y = static_cast<long>(idx) / w;
      values.clear();
      for (long dy = -radius; dy <= radius; ++dy) {
        const long yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (long dx = -radius; dx <= radius; ++dx) {
          const long xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const auto j = static_cast<std::size_t>(yy * w + xx);
          if (!marked.pixels[j]) values.push_back(out.pixels[j]);
        }
      }
      if (values.empty()) {
        still.push_back(idx);
        continue;
      }
      const auto mid = values.begin() + static_cast<long>((values.size() - 1) / 2);
      std::nth_element(values.begin(), mid, values.end());
      filled.emplace_back(idx, *mid);
    }
    if (filled.empty()) {
      ++radius;
      continue;
    }
    for (auto [idx, v] : filled) {
      out.pixels[idx] = v;
      marked.pixels[idx] = 0;
    }
    pending = std::move(still);
  }
  return out;
}

std::vector<float> resize_bilinear(const GrayImage& img, std::size_t size) {
  if (img.width == 0 || img.height == 0 || size == 0) throw ShapeError("resize of an empty image");
  std::vector<float> out(size * size);
  const double sx = static_cast<double>(img.width) / size, sy = static_cast<double>(img.height) / size;
  auto src = [&](std::size_t x, std::size_t y) { return img.at(x, y) / 255.0; };
  for (std::size_t oy = 0; oy < size; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (std::size_t ox = 0; ox < size; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      const double top = src(x0, y0) * (1 - tx) + src(x1, y0) * tx;
      const double bottom = src(x0, y1) * (1 - tx) + src(x1, y1) * tx;
      out[oy * size + ox] = static_cast<float>(top * (1 - ty) + bottom * ty);
    }
  }
  return out;
}

ndgrad::Tensor resize_normalize(const GrayImage& img, std::size_t size) {
  auto px = resize_bilinear(img, size);
  double mean = 0;
  for (float v : px) mean += v;
  mean /= static_cast<double>(px.size());
  double var = 0;
  for (float v : px) var += (v - mean) * (v - mean);
  var /= static_cast<double>(px.size());
  const double inv = 1.0 / std::sqrt(std::max(var, 1e-6));
  for (auto& v : px) v = static_cast<float>((v - mean) * inv);
  return ndgrad::Tensor::from({1, size, size}, std::move(px));
}

}  // namespace usmae::data
