#pragma once

#include <filesystem>
#include <string>

#include "diffmvr/models/model_params.hpp"
#include <nlohmann/json.hpp>

namespace diffmvr {

// Checkpoint container:
//   "DMVRCKP1" | u32 LE header length | UTF-8 JSON header |
//   one raw tensor record (VTEN1) per entry of header["params"], in order.
// The header carries names, shapes, model config, alpha1/alpha2, lambda,
// the VAE latent scale and the noise-schedule hash.

struct CheckpointInfo {
  std::string schedule_hash;
  nlohmann::json extra;
  std::vector<std::string> names;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params, const ParamList<float>& entries,
                     const std::string& schedule_hash, const nlohmann::json& extra = nlohmann::json::object());

/// All parameters.
void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const std::string& schedule_hash, const nlohmann::json& extra = nlohmann::json::object());

/// Rebuilds the model from the stored config and fills every stored tensor;
/// tensors absent from the file keep their seed-0 initialization.
ModelParams<float> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

/// Overwrites the parameters named in the file (e.g. a VAE-only checkpoint)
/// and the VAE latent scale. The stored config must match.
CheckpointInfo load_checkpoint_into(ModelParams<float>& params, const std::filesystem::path& path);

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace diffmvr
