#include "usmae/cli/config.hpp"

#include <fstream>
#include <set>

#include "usmae/errors.hpp"

namespace usmae::cli {

void RunConfig::validate() const {
  model.validate();
  optim.validate();
  if (task != "binary" && task != "multiclass") {
    throw ConfigError("task must be binary or multiclass, got '" + task + "'");
  }
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (lr_grid.empty() || wd_grid.empty()) throw ConfigError("tuning grids must not be empty");
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {
      {"model", vitmae::to_json(cfg.model)},
      {"optim", optim::to_json(cfg.optim)},
      {"task", cfg.task},
      {"manifest", cfg.manifest},
      {"out", cfg.out},
      {"from_checkpoint", cfg.from_checkpoint},
      {"folds", cfg.folds},
      {"repeats", cfg.repeats},
      {"test_fraction", cfg.test_fraction},
      {"seed", cfg.seed},
      {"group_split", cfg.group_split},
      {"lr_grid", cfg.lr_grid},
      {"wd_grid", cfg.wd_grid},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "model", "optim",         "task", "manifest",    "out",     "from_checkpoint", "folds",
      "repeats", "test_fraction", "seed", "group_split", "lr_grid", "wd_grid"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig cfg;
  try {
    if (j.contains("model")) cfg.model = vitmae::model_config_from_json(j["model"]);
    if (j.contains("optim")) cfg.optim = optim::optim_config_from_json(j["optim"]);
    cfg.task = j.value("task", cfg.task);
    cfg.manifest = j.value("manifest", cfg.manifest);
    cfg.out = j.value("out", cfg.out);
    cfg.from_checkpoint = j.value("from_checkpoint", cfg.from_checkpoint);
    cfg.folds = j.value("folds", cfg.folds);
    cfg.repeats = j.value("repeats", cfg.repeats);
    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.group_split = j.value("group_split", cfg.group_split);
    cfg.lr_grid = j.value("lr_grid", cfg.lr_grid);
    cfg.wd_grid = j.value("wd_grid", cfg.wd_grid);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  cfg.model.seed = cfg.seed;
  cfg.model.num_classes = cfg.num_classes();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const nlohmann::json& overrides) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path.string());
    try {
      f >> std::ws;
      if (f.peek() != std::ifstream::traits_type::eof()) j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (j.is_null()) j = nlohmann::json::object();
  }
  if (!overrides.is_null()) j.merge_patch(overrides);
  auto cfg = run_config_from_json(j);
  cfg.validate();
  return cfg;
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_json(cfg).dump(2) << "\n";
}

}  // namespace usmae::cli
