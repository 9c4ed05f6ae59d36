#include "diffmvr/models/checkpoint.hpp"

#include <array>
#include <fstream>
#include <map>

#include "diffmvr/dataio/raw_io.hpp"

namespace diffmvr {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'M', 'V', 'R', 'C', 'K', 'P', '1'};

std::map<std::string, Tensor> by_name(const ModelParams<float>& params) {
  std::map<std::string, Tensor> out;
  for (auto& p : params.all_parameters()) out.emplace(p.name, p.tensor);
  return out;
}

struct RawCheckpoint {
  nlohmann::json header;
  std::vector<Tensor> tensors;
};

RawCheckpoint read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("checkpoint " + path.string() + ": bad magic");
  }
  unsigned char len_bytes[4];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 4)) throw FormatError("checkpoint: truncated header length");
  const std::uint32_t len = len_bytes[0] | (len_bytes[1] << 8) | (len_bytes[2] << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw FormatError("checkpoint: truncated header");
  RawCheckpoint raw;
  try {
    raw.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  for (const auto& entry : raw.header.at("params")) {
    Tensor t = read_raw(in);
    if (t.shape() != entry.at("shape").get<Shape>()) {
      throw FormatError("checkpoint: tensor " + entry.at("name").get<std::string>() + " disagrees with header");
    }
    raw.tensors.push_back(std::move(t));
  }
  return raw;
}

CheckpointInfo apply(ModelParams<float>& params, const RawCheckpoint& raw) {
  CheckpointInfo info;
  auto named = by_name(params);
  const auto& entries = raw.header.at("params");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto name = entries[i].at("name").get<std::string>();
    auto it = named.find(name);
    if (it == named.end()) throw FormatError("checkpoint: unknown parameter " + name);
    if (it->second.shape() != raw.tensors[i].shape()) {
      throw FormatError("checkpoint: shape mismatch for " + name);
    }
    auto dst = it->second.mutable_data();
    std::copy(raw.tensors[i].data().begin(), raw.tensors[i].data().end(), dst.begin());
    info.names.push_back(name);
  }
  params.vae.latent_scale = raw.header.at("latent_scale").get<double>();
  info.schedule_hash = raw.header.value("schedule_hash", "");
  info.extra = raw.header.value("extra", nlohmann::json::object());
  return info;
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return {{"side", cfg.side},
          {"channels", cfg.channels},
          {"latent_channels", cfg.latent_channels},
          {"embed_dim", cfg.embed_dim},
          {"token_count", cfg.token_count},
          {"token_width", cfg.token_width},
          {"proj_dim", cfg.projected_dim()},
          {"unet_channels0", cfg.unet_channels0},
          {"unet_channels1", cfg.unet_channels1},
          {"time_dim", cfg.time_dim},
          {"t_max", cfg.t_max}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.side = j.at("side");
  cfg.channels = j.at("channels");
  cfg.latent_channels = j.at("latent_channels");
  cfg.embed_dim = j.at("embed_dim");
  cfg.token_count = j.at("token_count");
  cfg.token_width = j.at("token_width");
  cfg.proj_dim = j.at("proj_dim");
  cfg.unet_channels0 = j.at("unet_channels0");
  cfg.unet_channels1 = j.at("unet_channels1");
  cfg.time_dim = j.at("time_dim");
  cfg.t_max = j.at("t_max");
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const ParamList<float>& entries, const std::string& schedule_hash, const nlohmann::json& extra) {
  nlohmann::json header;
  header["format"] = "diffmvr-checkpoint";
  header["version"] = 1;
  header["config"] = config_to_json(params.config);
  header["alpha1"] = params.alpha1;
  header["alpha2"] = params.alpha2;
  header["lambda"] = params.lambda;
  header["latent_scale"] = params.vae.latent_scale;
  header["schedule_hash"] = schedule_hash;
  header["extra"] = extra;
  header["params"] = nlohmann::json::array();
  for (const auto& p : entries) header["params"].push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  const auto len = static_cast<std::uint32_t>(text.size());
  const char len_bytes[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                             static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
  out.write(len_bytes, 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : entries) write_raw(out, p.tensor);
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const std::string& schedule_hash, const nlohmann::json& extra) {
  save_checkpoint(path, params, params.all_parameters(), schedule_hash, extra);
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  RawCheckpoint raw = read_file(path);
  ModelParams<float> params = ModelParams<float>::init(config_from_json(raw.header.at("config")), 0);
  params.alpha1 = raw.header.at("alpha1");
  params.alpha2 = raw.header.at("alpha2");
  params.lambda = raw.header.at("lambda");
  CheckpointInfo loaded = apply(params, raw);
  if (info) *info = std::move(loaded);
  return params;
}

CheckpointInfo load_checkpoint_into(ModelParams<float>& params, const std::filesystem::path& path) {
  RawCheckpoint raw = read_file(path);
  if (config_to_json(config_from_json(raw.header.at("config"))) != config_to_json(params.config)) {
    throw ConfigError("checkpoint " + path.string() + " was written for a different architecture");
  }
  return apply(params, raw);
}

}  // namespace diffmvr
