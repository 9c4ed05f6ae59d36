#pragma once

#include <cstdint>
#include <utility>

#include "diffmvr/models/attention.hpp"
#include "diffmvr/models/guidance_encoder.hpp"
#include "diffmvr/models/unet.hpp"
#include "diffmvr/models/vae.hpp"

namespace diffmvr {

/// Every trainable network plus the fusion weights and the motion-loss weight.
template <class T>
struct ModelParams {
  ModelConfig config;
  Vae<T> vae;
  GuidanceEncoder<T> sym_encoder, past_encoder;
  TokenProjector<T> sym_projector, past_projector;
  UNet<T> unet;
  double alpha1 = 0.5;
  double alpha2 = 0.5;
  double lambda = 0.1;

  /// Initialization order is fixed: VAE, symmetric encoder, past encoder,
  /// symmetric projector, past projector, U-Net.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams p;
    p.config = cfg;
    p.vae = Vae<T>::make(rng, cfg);
    p.sym_encoder = GuidanceEncoder<T>::make(rng, cfg);
    p.past_encoder = GuidanceEncoder<T>::make(rng, cfg);
    p.sym_projector = TokenProjector<T>::make(rng, cfg);
    p.past_projector = TokenProjector<T>::make(rng, cfg);
    p.unet = UNet<T>::make(rng, cfg);
    return p;
  }

  std::pair<double, double> normalized_alpha() const {
    const double total = alpha1 + alpha2;
    if (!(alpha1 >= 0.0 && alpha2 >= 0.0 && total > 0.0)) {
      throw ConfigError("fusion weights must be non-negative with a positive sum");
    }
    return {alpha1 / total, alpha2 / total};
  }

  ParamList<T> vae_parameters() const {
    ParamList<T> out;
    vae.collect(out, "vae");
    return out;
  }

  /// Parameters trained by the diffusion objective (the VAE stays frozen).
  ParamList<T> diffusion_parameters() const {
    ParamList<T> out;
    sym_encoder.collect(out, "sym_encoder");
    past_encoder.collect(out, "past_encoder");
    sym_projector.collect(out, "sym_projector");
    past_projector.collect(out, "past_projector");
    unet.collect(out, "unet");
    return out;
  }

  ParamList<T> all_parameters() const {
    ParamList<T> out = vae_parameters();
    for (auto& p : diffusion_parameters()) out.push_back(std::move(p));
    return out;
  }
};

/// z_s or z_v: [1 x p_e] embedding from the source-specific encoder.
template <class T>
BasicTensor<T> encode_guidance(const ModelParams<T>& params, const BasicTensor<T>& image, GuidanceSource source) {
  const ModelConfig& cfg = params.config;
  if (image.rank() != 3 || image.dim(0) != cfg.channels || image.dim(1) != cfg.side || image.dim(2) != cfg.side) {
    throw DimensionError("guidance image must be " + shape_str({cfg.channels, cfg.side, cfg.side}) + ", got " +
                         shape_str(image.shape()));
  }
  return source == GuidanceSource::kSymmetric ? params.sym_encoder(image) : params.past_encoder(image);
}

template <class T>
GuidanceTokens<T> project_tokens(const ModelParams<T>& params, const BasicTensor<T>& embedding,
                                 GuidanceSource source) {
  return source == GuidanceSource::kSymmetric ? params.sym_projector(embedding, source)
                                              : params.past_projector(embedding, source);
}

template <class T>
GuidanceTokens<T> guidance_tokens(const ModelParams<T>& params, const BasicTensor<T>& image, GuidanceSource source) {
  return project_tokens(params, encode_guidance(params, image, source), source);
}

}  // namespace diffmvr
