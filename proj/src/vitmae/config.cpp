#include "usmae/vitmae/config.hpp"

#include <set>
#include <string>

#include "usmae/errors.hpp"

namespace usmae::vitmae {

ModelConfig ModelConfig::reference() {
  ModelConfig cfg;
  cfg.image_size = 224;
  cfg.patch_size = 16;
  return cfg;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (patch_size == 0 || image_size == 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0) {
    fail("image_size " + std::to_string(image_size) + " is not divisible by patch_size " +
         std::to_string(patch_size));
  }
  if (embed_dim == 0 || encoder_heads == 0 || embed_dim % encoder_heads != 0) {
    fail("embed_dim must be a positive multiple of encoder_heads");
  }
  if (decoder_dim == 0 || decoder_heads == 0 || decoder_dim % decoder_heads != 0) {
    fail("decoder_dim must be a positive multiple of decoder_heads");
  }
  // 2-D sin-cos embeddings split the width into four equal bands
  if (embed_dim % 4 != 0 || decoder_dim % 4 != 0) fail("embedding widths must be multiples of 4");
  if (encoder_depth == 0 || mlp_ratio == 0) fail("encoder_depth and mlp_ratio must be positive");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) fail("mask_ratio must lie in [0, 1)");
  if (num_classes != 2 && num_classes != 3) fail("num_classes must be 2 or 3");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {
      {"image_size", cfg.image_size},
      {"patch_size", cfg.patch_size},
      {"embed_dim", cfg.embed_dim},
      {"encoder_depth", cfg.encoder_depth},
      {"encoder_heads", cfg.encoder_heads},
      {"mlp_ratio", cfg.mlp_ratio},
      {"decoder_dim", cfg.decoder_dim},
      {"decoder_depth", cfg.decoder_depth},
      {"decoder_heads", cfg.decoder_heads},
      {"mask_ratio", cfg.mask_ratio},
      {"num_classes", cfg.num_classes},
      {"loss_on_masked_only", cfg.loss_on_masked_only},
      {"seed", cfg.seed},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "image_size",    "patch_size",  "embed_dim",    "encoder_depth",       "encoder_heads",
      "mlp_ratio",     "decoder_dim", "decoder_depth", "decoder_heads",      "mask_ratio",
      "num_classes",   "loss_on_masked_only", "seed"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  ModelConfig cfg;
  try {
    cfg.image_size = j.value("image_size", cfg.image_size);
    cfg.patch_size = j.value("patch_size", cfg.patch_size);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.encoder_depth = j.value("encoder_depth", cfg.encoder_depth);
    cfg.encoder_heads = j.value("encoder_heads", cfg.encoder_heads);
    cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
    cfg.decoder_dim = j.value("decoder_dim", cfg.decoder_dim);
    cfg.decoder_depth = j.value("decoder_depth", cfg.decoder_depth);
    cfg.decoder_heads = j.value("decoder_heads", cfg.decoder_heads);
    cfg.mask_ratio = j.value("mask_ratio", cfg.mask_ratio);
    cfg.num_classes = j.value("num_classes", cfg.num_classes);
    cfg.loss_on_masked_only = j.value("loss_on_masked_only", cfg.loss_on_masked_only);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return cfg;
}

}  // namespace usmae::vitmae
