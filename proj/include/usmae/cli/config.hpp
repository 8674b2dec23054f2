#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "usmae/optim/config.hpp"
#include "usmae/vitmae/config.hpp"

namespace usmae::cli {

// Everything a run needs; echoed to run.json and into checkpoint metadata.
struct RunConfig {
  vitmae::ModelConfig model;
  optim::OptimConfig optim;
  std::string task = "binary";  // binary | multiclass
  std::string manifest;
  std::string out;
  std::string from_checkpoint;
  std::size_t folds = 4;
  std::size_t repeats = 5;
  double test_fraction = 161.0 / 969.0;
  std::uint64_t seed = 0;
  bool group_split = false;
  std::vector<double> lr_grid = {1e-4, 3e-4, 1e-3};
  std::vector<double> wd_grid = {1e-3, 1e-2, 5e-2};

  std::size_t num_classes() const { return task == "multiclass" ? 3 : 2; }

  // Throws ConfigError naming the first invalid field.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& cfg);
// Missing keys keep defaults; unknown keys raise ConfigError naming them.
RunConfig run_config_from_json(const nlohmann::json& j);

// Defaults, then the JSON file (when `path` is non-empty), then `overrides`
// merged on top.
RunConfig load_config(const std::filesystem::path& path, const nlohmann::json& overrides = {});

void save_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace usmae::cli
