#pragma once

#include <cstddef>

#include <json.hpp>

namespace usmae::optim {

struct OptimConfig {
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;
  std::size_t epochs = 100;
  double warmup_fraction = 0.10;
  std::size_t batch_size = 16;
  // Stop fine-tuning after this many epochs without a new best validation
  // accuracy; 0 disables.
  std::size_t early_stop_patience = 0;

  // Throws ConfigError naming the first offending field.
  void validate() const;

  bool operator==(const OptimConfig&) const = default;
};

nlohmann::json to_json(const OptimConfig& cfg);
// Missing keys keep their defaults; unknown keys raise ConfigError.
OptimConfig optim_config_from_json(const nlohmann::json& j);

}  // namespace usmae::optim
