#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "usmae/data/image.hpp"
#include "usmae/data/phantom.hpp"
#include "usmae/vitmae/model.hpp"

namespace usmae::scorecam {

// Patch-token activations of one image laid out as feature maps.
struct TokenGrid {
  std::vector<double> activations;  // [channels, grid, grid]
  std::size_t channels = 0;
  std::size_t grid = 0;
  std::string layer;

  double at(std::size_t c, std::size_t r, std::size_t col) const {
    return activations[(c * grid + r) * grid + col];
  }
};

// Output of the final encoder block's first layer norm for a full forward
// pass, class token dropped, token 1 + r*grid + c placed at cell (r, c).
TokenGrid extract_token_grid(const vitmae::Model& model, const ndgrad::Tensor& image);

enum class ScoreMode {
  probability_difference,  // p(target | masked) - p(target | zero image)
  probability,
  logit,
};

const char* score_mode_name(ScoreMode mode);
ScoreMode parse_score_mode(const std::string& name);

struct ScorecamOptions {
  std::size_t channel_budget = 64;
  ScoreMode score = ScoreMode::probability_difference;
};

struct ChannelWeight {
  std::size_t channel = 0;
  double variance = 0;
  double weight = 0;
};

struct SaliencyMap {
  std::size_t width = 0, height = 0;
  std::vector<double> values;  // row-major, in [0,1]
  int target = 0;
  std::size_t channels_used = 0;
  std::vector<ChannelWeight> channels;  // ascending channel index

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

// Score-CAM over the top-variance channels of `grid`. Constant channels are
// skipped; the map is relu'd and min-max normalized, all zeros when flat.
SaliencyMap scorecam(const vitmae::Model& model, const ndgrad::Tensor& image,
                     const TokenGrid& grid, int target, const ScorecamOptions& opts = {});
SaliencyMap scorecam(const vitmae::Model& model, const ndgrad::Tensor& image, int target,
                     const ScorecamOptions& opts = {});

// Bilinear upsampling of a g x g map to size x size, pixel centers at +0.5.
std::vector<double> upsample(std::span<const double> map, std::size_t grid, std::size_t size);

// Blue (0) to red (1) ramp.
void ramp_color(double v, std::uint8_t* rgb);

// Alpha blend of the ramped saliency over a grayscale image.
data::RgbImage overlay(const data::GrayImage& image, const SaliencyMap& map, double alpha = 0.5);

data::GrayImage saliency_image(const SaliencyMap& map);

// `channel,variance,weight` rows.
void write_weights_csv(const std::filesystem::path& path, const SaliencyMap& map);

// Share of total saliency inside the inclusive pixel box; 0 for an all-zero map.
double mass_fraction(const SaliencyMap& map, const data::Box& box);

}  // namespace usmae::scorecam
