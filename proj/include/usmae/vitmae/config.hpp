#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

namespace usmae::vitmae {

// Hyperparameters of encoder, decoder and classification head. Defaults are
// the desk-scale configuration; reference() mirrors the 224/16 clinical setup.
struct ModelConfig {
  std::size_t image_size = 64;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 128;
  std::size_t encoder_depth = 4;
  std::size_t encoder_heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t decoder_dim = 64;
  std::size_t decoder_depth = 2;
  std::size_t decoder_heads = 4;
  double mask_ratio = 0.25;
  std::size_t num_classes = 2;
  bool loss_on_masked_only = false;
  std::uint64_t seed = 0;

  static ModelConfig reference();

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t patch_dim() const { return patch_size * patch_size; }

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace usmae::vitmae
