#include "usmae/scorecam/scorecam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "usmae/errors.hpp"

namespace usmae::scorecam {

namespace {

double target_score(const vitmae::Model& model, const ndgrad::Tensor& image, int target,
                    ScoreMode mode) {
  const auto out = model.forward_classify(image);
  if (mode == ScoreMode::logit) return out.logits[static_cast<std::size_t>(target)];
  return out.probs[static_cast<std::size_t>(target)];
}

}  // namespace

const char* score_mode_name(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::probability_difference:
      return "difference";
    case ScoreMode::probability:
      return "probability";
    case ScoreMode::logit:
      return "logit";
  }
  return "?";
}

ScoreMode parse_score_mode(const std::string& name) {
  for (auto m : {ScoreMode::probability_difference, ScoreMode::probability, ScoreMode::logit}) {
    if (name == score_mode_name(m)) return m;
  }
  throw ConfigError("unknown score mode '" + name + "' (difference, probability, logit)");
}

TokenGrid extract_token_grid(const vitmae::Model& model, const ndgrad::Tensor& image) {
  if (model.mode() != vitmae::ModelMode::finetuning) {
    throw StateError("extract_token_grid needs a fine-tuning model");
  }
  const auto& cfg = model.config();
  vitmae::TokenCapture<float> capture;
  {
    ndgrad::NoGradGuard guard;
    const ndgrad::Tensor images[] = {image};
    model.classify_logits(images, &capture);
  }
  const std::size_t g = cfg.grid(), dim = cfg.embed_dim;
  if (capture.seq != g * g + 1) throw ShapeError("captured token count does not match the grid");
  TokenGrid grid;
  grid.channels = dim;
  grid.grid = g;
  grid.layer = "encoder." + std::to_string(cfg.encoder_depth - 1) + ".norm1";
  grid.activations.resize(dim * g * g);
  const auto tokens = capture.tokens.data();
  for (std::size_t t = 0; t < g * g; ++t)
    for (std::size_t d = 0; d < dim; ++d) {
      grid.activations[d * g * g + t] = tokens[(t + 1) * dim + d];
    }
  return grid;
}

std::vector<double> upsample(std::span<const double> map, std::size_t grid, std::size_t size) {
  std::vector<double> out(size * size);
  const double scale = static_cast<double>(grid) / static_cast<double>(size);
  auto coord = [&](std::size_t o, std::size_t& i0, std::size_t& i1, double& t) {
    double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(grid - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, grid - 1);
    t = s - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < size; ++y) {
    std::size_t y0, y1;
    double ty;
    coord(y, y0, y1, ty);
    for (std::size_t x = 0; x < size; ++x) {
      std::size_t x0, x1;
      double tx;
      coord(x, x0, x1, tx);
      const double top = map[y0 * grid + x0] * (1 - tx) + map[y0 * grid + x1] * tx;
      const double bot = map[y1 * grid + x0] * (1 - tx) + map[y1 * grid + x1] * tx;
      out[y * size + x] = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

SaliencyMap scorecam(const vitmae::Model& model, const ndgrad::Tensor& image,
                     const TokenGrid& grid, int target, const ScorecamOptions& opts) {
  const auto& cfg = model.config();
  if (target < 0 || static_cast<std::size_t>(target) >= cfg.num_classes) {
    throw ContractError("target class " + std::to_string(target) + " out of range");
  }
  if (opts.channel_budget == 0 || opts.channel_budget > grid.channels) {
    throw ContractError("channel budget must lie in [1, " + std::to_string(grid.channels) + "]");
  }
  const std::size_t size = cfg.image_size, cells = grid.grid * grid.grid;
  if (image.dims() != ndgrad::Shape{1, size, size}) throw ShapeError("scorecam: image shape");

  std::vector<ChannelWeight> candidates;
  for (std::size_t c = 0; c < grid.channels; ++c) {
    const auto map = std::span(grid.activations).subspan(c * cells, cells);
    const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
    if (*lo == *hi) continue;
    const double mean = std::accumulate(map.begin(), map.end(), 0.0) / cells;
    double var = 0;
    for (double v : map) var += (v - mean) * (v - mean);
    candidates.push_back({c, var / cells, 0.0});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.variance > b.variance; });
  if (candidates.size() > opts.channel_budget) candidates.resize(opts.channel_budget);
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.channel < b.channel; });

  ndgrad::NoGradGuard guard;
  double baseline = 0;
  if (opts.score == ScoreMode::probability_difference) {
    baseline = target_score(model, ndgrad::Tensor::zeros({1, size, size}), target,
                            ScoreMode::probability);
  }
  std::vector<double> sum(size * size, 0.0);
  std::vector<float> masked(size * size);
  const auto pixels = image.data();
  for (auto& ch : candidates) {
    const auto map = std::span(grid.activations).subspan(ch.channel * cells, cells);
    const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
    std::vector<double> norm(cells);
    for (std::size_t i = 0; i < cells; ++i) norm[i] = (map[i] - *lo) / (*hi - *lo);
    const auto up = upsample(norm, grid.grid, size);
    for (std::size_t i = 0; i < up.size(); ++i) {
      masked[i] = static_cast<float>(pixels[i] * up[i]);
    }
    const auto input = ndgrad::Tensor::from({1, size, size}, masked);
    ch.weight = target_score(model, input, target, opts.score) - baseline;
    for (std::size_t i = 0; i < up.size(); ++i) sum[i] += ch.weight * up[i];
  }

  SaliencyMap out;
  out.width = out.height = size;
  out.target = target;
  out.channels_used = candidates.size();
  out.channels = std::move(candidates);
  for (auto& v : sum) v = std::max(v, 0.0);
  const auto [lo, hi] = std::minmax_element(sum.begin(), sum.end());
  out.values.assign(sum.size(), 0.0);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < sum.size(); ++i) out.values[i] = (sum[i] - *lo) / (*hi - *lo);
  }
  return out;
}

SaliencyMap scorecam(const vitmae::Model& model, const ndgrad::Tensor& image, int target,
                     const ScorecamOptions& opts) {
  return scorecam(model, image, extract_token_grid(model, image), target, opts);
}

void ramp_color(double v, std::uint8_t* rgb) {
  v = std::clamp(v, 0.0, 1.0);
  rgb[0] = static_cast<std::uint8_t>(std::lround(255 * v));
  rgb[1] = 0;
  rgb[2] = static_cast<std::uint8_t>(std::lround(255 * (1 - v)));
}

data::RgbImage overlay(const data::GrayImage& image, const SaliencyMap& map, double alpha) {
  if (image.width != map.width || image.height != map.height) {
    throw ShapeError("overlay: image is " + std::to_string(image.width) + "x" +
                     std::to_string(image.height) + ", saliency is " + std::to_string(map.width) +
                     "x" + std::to_string(map.height));
  }
  if (!(alpha >= 0 && alpha <= 1)) throw ContractError("overlay alpha must lie in [0, 1]");
  data::RgbImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    std::uint8_t color[3];
    ramp_color(map.values[i], color);
    for (int c = 0; c < 3; ++c) {
      const double v = (1 - alpha) * image.pixels[i] + alpha * color[c];
      out.pixels[3 * i + c] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

data::GrayImage saliency_image(const SaliencyMap& map) {
  data::GrayImage out(map.width, map.height);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(255 * map.values[i]));
  }
  return out;
}

void write_weights_csv(const std::filesystem::path& path, const SaliencyMap& map) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "channel,variance,weight\n";
  char line[96];
  for (const auto& ch : map.channels) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", ch.channel, ch.variance, ch.weight);
    f << line;
  }
}

double mass_fraction(const SaliencyMap& map, const data::Box& box) {
  double total = 0, inside = 0;
  for (std::size_t y = 0; y < map.height; ++y)
    for (std::size_t x = 0; x < map.width; ++x) {
      const double v = map.at(x, y);
      total += v;
      if (!box.empty && x >= box.x0 && x <= box.x1 && y >= box.y0 && y <= box.y1) inside += v;
    }
  return total > 0 ? inside / total : 0.0;
}

}  // namespace usmae::scorecam
