#pragma once

#include <cmath>
#include <optional>

#include "diffmvr/models/config.hpp"
#include "diffmvr/models/layers.hpp"

namespace diffmvr {

enum class LatentKind { kClean, kNoisy };

/// Spatial latent [c_z x p/4 x p/4]. Noisy latents carry their timestep.
template <class T>
struct LatentMap {
  BasicTensor<T> values;
  LatentKind kind = LatentKind::kClean;
  std::optional<int> timestep;
};

template <class T>
struct VaeMoments {
  BasicTensor<T> mean;     // mu, unscaled
  BasicTensor<T> log_var;  // log sigma^2
};

enum class EncodeMode { kDeterministic, kSampling };

/// Two stride-2 stages down to c_z channels at p/4, mirrored by the decoder.
/// Latents handed to diffusion are mu * latent_scale.
template <class T>
struct Vae {
  Conv2dLayer<T> enc1, enc2, enc3, enc_out;
  Conv2dLayer<T> dec_in, dec1, dec2, dec_out;
  double latent_scale = 1.0;
  std::size_t latent_channels = 4;

  static Vae make(Rng& rng, const ModelConfig& cfg) {
    Vae v;
    v.latent_channels = cfg.latent_channels;
    v.enc1 = Conv2dLayer<T>::make(rng, cfg.channels, 16);
    v.enc2 = Conv2dLayer<T>::make(rng, 16, 32, 3, 2);
    v.enc3 = Conv2dLayer<T>::make(rng, 32, 32, 3, 2);
    v.enc_out = Conv2dLayer<T>::make(rng, 32, 2 * cfg.latent_channels);
    v.dec_in = Conv2dLayer<T>::make(rng, cfg.latent_channels, 32);
    v.dec1 = Conv2dLayer<T>::make(rng, 32, 16);
    v.dec2 = Conv2dLayer<T>::make(rng, 16, 16);
    v.dec_out = Conv2dLayer<T>::make(rng, 16, cfg.channels);
    return v;
  }

  VaeMoments<T> moments(const BasicTensor<T>& frame) const {
    for (T v : frame.data()) {
      if (!(v >= T{0} && v <= T{1})) throw ContractError("vae_encode: frame values must lie in [0,1]");
    }
    BasicTensor<T> h = silu(enc1(frame));
    h = silu(enc2(h));
    h = silu(enc3(h));
    h = enc_out(h);
    check_finite(h, "VAE encoder activations");
    return {slice0(h, 0, latent_channels), slice0(h, latent_channels, 2 * latent_channels)};
  }

  /// Maps an unscaled latent back to a [0,1] frame.
  BasicTensor<T> decode_unscaled(const BasicTensor<T>& z) const {
    BasicTensor<T> h = silu(dec_in(z));
    h = silu(dec1(upsample2x(h)));
    h = silu(dec2(upsample2x(h)));
    return sigmoid(dec_out(h));
  }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    enc1.collect(out, prefix + ".enc1");
    enc2.collect(out, prefix + ".enc2");
    enc3.collect(out, prefix + ".enc3");
    enc_out.collect(out, prefix + ".enc_out");
    dec_in.collect(out, prefix + ".dec_in");
    dec1.collect(out, prefix + ".dec1");
    dec2.collect(out, prefix + ".dec2");
    dec_out.collect(out, prefix + ".dec_out");
  }
};

/// Deterministic mode returns mu; sampling returns mu + sigma * eps, with
/// sigma replaced by `forced_sigma` when given.
template <class T>
LatentMap<T> vae_encode(const Vae<T>& vae, const BasicTensor<T>& frame, EncodeMode mode = EncodeMode::kDeterministic,
                        Rng* rng = nullptr, std::optional<double> forced_sigma = std::nullopt) {
  VaeMoments<T> m = vae.moments(frame);
  BasicTensor<T> z = m.mean;
  if (mode == EncodeMode::kSampling) {
    if (rng == nullptr) throw ContractError("vae_encode: sampling mode needs an rng");
    BasicTensor<T> eps = rng->normal_tensor<T>(m.mean.shape());
    BasicTensor<T> sigma = forced_sigma ? BasicTensor<T>::full(m.mean.shape(), static_cast<T>(*forced_sigma))
                                        : exp(scale(m.log_var, T(0.5)));
    z = add(m.mean, mul(sigma, eps));
  }
  return {scale(z, static_cast<T>(vae.latent_scale)), LatentKind::kClean, std::nullopt};
}

template <class T>
BasicTensor<T> vae_decode(const Vae<T>& vae, const LatentMap<T>& z) {
  if (z.kind != LatentKind::kClean) throw ContractError("vae_decode: latent is still noisy");
  return vae.decode_unscaled(scale(z.values, static_cast<T>(1.0 / vae.latent_scale)));
}

template <class T>
struct VaeLoss {
  BasicTensor<T> total, recon, kl;
};

/// Reconstruction MSE (mean over pixels) plus kl_weight * KL (mean over latent
/// entries), with a reparameterized posterior sample.
template <class T>
VaeLoss<T> vae_loss(const Vae<T>& vae, const BasicTensor<T>& frame, Rng& rng, double kl_weight) {
  VaeMoments<T> m = vae.moments(frame);
  BasicTensor<T> eps = rng.normal_tensor<T>(m.mean.shape());
  BasicTensor<T> sigma = exp(scale(m.log_var, T(0.5)));
  BasicTensor<T> z = add(m.mean, mul(sigma, eps));
  BasicTensor<T> recon = mean(square(sub(vae.decode_unscaled(z), frame)));
  // 0.5 * (mu^2 + sigma^2 - 1 - log sigma^2)
  BasicTensor<T> kl_terms = sub(add(square(m.mean), exp(m.log_var)), add_scalar(m.log_var, T{1}));
  BasicTensor<T> kl = scale(mean(kl_terms), T(0.5));
  return {add(recon, scale(kl, static_cast<T>(kl_weight))), recon, kl};
}

}  // namespace diffmvr
