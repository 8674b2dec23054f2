#include "usmae/optim/config.hpp"

#include <set>
#include <string>

#include "usmae/errors.hpp"

namespace usmae::optim {

void OptimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("optim config: ") + name + " must be positive");
  };
  positive(learning_rate, "learning_rate");
  positive(weight_decay, "weight_decay");
  positive(beta1, "beta1");
  positive(beta2, "beta2");
  positive(eps, "eps");
  positive(clip_norm, "clip_norm");
  positive(static_cast<double>(epochs), "epochs");
  positive(static_cast<double>(batch_size), "batch_size");
  if (beta1 >= 1.0 || beta2 >= 1.0) throw ConfigError("optim config: betas must be below 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ConfigError("optim config: warmup_fraction must lie in [0, 1)");
  }
}

nlohmann::json to_json(const OptimConfig& cfg) {
  return {
      {"learning_rate", cfg.learning_rate},
      {"weight_decay", cfg.weight_decay},
      {"beta1", cfg.beta1},
      {"beta2", cfg.beta2},
      {"eps", cfg.eps},
      {"clip_norm", cfg.clip_norm},
      {"epochs", cfg.epochs},
      {"warmup_fraction", cfg.warmup_fraction},
      {"batch_size", cfg.batch_size},
      {"early_stop_patience", cfg.early_stop_patience},
  };
}

OptimConfig optim_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "learning_rate", "weight_decay", "beta1",      "beta2",      "eps",
      "clip_norm",     "epochs",       "warmup_fraction", "batch_size", "early_stop_patience"};
  if (!j.is_object()) throw ConfigError("optim config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown optim config key '" + key + "'");
  }
  OptimConfig cfg;
  try {
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.eps = j.value("eps", cfg.eps);
    cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.warmup_fraction = j.value("warmup_fraction", cfg.warmup_fraction);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.early_stop_patience = j.value("early_stop_patience", cfg.early_stop_patience);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("optim config: ") + e.what());
  }
  return cfg;
}

}  // namespace usmae::optim
