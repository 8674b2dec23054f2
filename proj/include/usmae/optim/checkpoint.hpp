#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "usmae/optim/config.hpp"
#include "usmae/vitmae/model.hpp"

namespace usmae::optim {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointMeta {
  vitmae::ModelConfig model;
  OptimConfig optim;
  std::uint64_t seed = 0;
  vitmae::ModelMode mode = vitmae::ModelMode::pretraining;
  // git blob SHA-1 of the tensor section; filled in on save
  std::string content_hash;
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  CheckpointMeta meta;
  vitmae::Model::StateDict tensors;

  // Rebuilds a model in meta.mode with these weights.
  vitmae::Model to_model() const;
};

// Writes "USMK" | u16 version | u32 count | tensors | metadata JSON | u64
// metadata length, little-endian. Returns the content hash.
std::string save_checkpoint(const std::filesystem::path& path, const vitmae::Model& model,
                            CheckpointMeta meta);

// Throws IoError on unreadable, truncated or corrupted files and on unknown
// format versions.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// "blob <size>\0" + bytes, hashed with SHA-1, as lowercase hex.
std::string git_blob_sha1(std::string_view bytes);

}  // namespace usmae::optim
