#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffmvr/models/attention.hpp"
#include "diffmvr/models/config.hpp"
#include "diffmvr/models/vae.hpp"

namespace diffmvr {

/// Inpainting conditioning: VAE latent of the masked context plus the mask
/// average-pooled to latent resolution.
template <class T>
struct MaskedLatentCond {
  BasicTensor<T> context_latent;  // [c_z x p_z x p_z]
  BasicTensor<T> mask;            // [1 x p_z x p_z]

  bool occluded() const {
    for (T v : mask.data()) {
      if (v != T{0}) return true;
    }
    return false;
  }
};

/// Sinusoidal embedding of the timestep: [sin(T f_i), cos(T f_i)], f_i = 10000^{-i/half}.
template <class T>
BasicTensor<T> timestep_embedding(int timestep, std::size_t dim) {
  const std::size_t half = dim / 2;
  std::vector<T> values(dim, T{0});
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    values[i] = static_cast<T>(std::sin(timestep * freq));
    values[half + i] = static_cast<T>(std::cos(timestep * freq));
  }
  return BasicTensor<T>::from(Shape{1, dim}, std::move(values));
}

template <class T>
struct ResBlock {
  GroupNormLayer<T> norm1, norm2;
  Conv2dLayer<T> conv1, conv2;
  LinearLayer<T> time_proj;
  std::optional<Conv2dLayer<T>> skip;

  static ResBlock make(Rng& rng, std::size_t in, std::size_t out, std::size_t time_hidden) {
    ResBlock b;
    b.norm1 = GroupNormLayer<T>::make(in, 4);
    b.conv1 = Conv2dLayer<T>::make(rng, in, out);
    b.time_proj = LinearLayer<T>::make(rng, time_hidden, out);
    b.norm2 = GroupNormLayer<T>::make(out, 4);
    b.conv2 = Conv2dLayer<T>::make(rng, out, out, 3, 1, 0.5);
    if (in != out) b.skip = Conv2dLayer<T>::make(rng, in, out, 1);
    return b;
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x, const BasicTensor<T>& time_hidden) const {
    BasicTensor<T> h = conv1(silu(norm1(x)));
    BasicTensor<T> t = time_proj(time_hidden);
    h = add_bias(h, reshape(t, Shape{t.numel()}), 0);
    h = conv2(silu(norm2(h)));
    return add(skip ? (*skip)(x) : x, h);
  }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    norm1.collect(out, prefix + ".norm1");
    conv1.collect(out, prefix + ".conv1");
    time_proj.collect(out, prefix + ".time_proj");
    norm2.collect(out, prefix + ".norm2");
    conv2.collect(out, prefix + ".conv2");
    if (skip) skip->collect(out, prefix + ".skip");
  }
};

/// Two-level U-Net over latents (widths c0, c1) with a bottleneck. Every
/// level and the bottleneck end in a fused cross-attention block.
template <class T>
struct UNet {
  LinearLayer<T> time1, time2;
  Conv2dLayer<T> conv_in;
  ResBlock<T> res_down0, res_down1, res_mid, res_up1, res_up0;
  CrossAttentionBlock<T> att_down0, att_down1, att_mid, att_up1, att_up0;
  Conv2dLayer<T> down0, down1;
  GroupNormLayer<T> norm_out;
  Conv2dLayer<T> conv_out;
  std::size_t time_dim = 32;
  int t_max = 50;

  static UNet make(Rng& rng, const ModelConfig& cfg) {
    const std::size_t c0 = cfg.unet_channels0, c1 = cfg.unet_channels1, d = cfg.token_width;
    const std::size_t th = 2 * cfg.time_dim;
    UNet u;
    u.time_dim = cfg.time_dim;
    u.t_max = cfg.t_max;
    u.time1 = LinearLayer<T>::make(rng, cfg.time_dim, th);
    u.time2 = LinearLayer<T>::make(rng, th, th);
    u.conv_in = Conv2dLayer<T>::make(rng, 2 * cfg.latent_channels + 1, c0);
    u.res_down0 = ResBlock<T>::make(rng, c0, c0, th);
    u.att_down0 = CrossAttentionBlock<T>::make(rng, c0, d);
    u.down0 = Conv2dLayer<T>::make(rng, c0, c1, 3, 2);
    u.res_down1 = ResBlock<T>::make(rng, c1, c1, th);
    u.att_down1 = CrossAttentionBlock<T>::make(rng, c1, d);
    u.down1 = Conv2dLayer<T>::make(rng, c1, c1, 3, 2);
    u.res_mid = ResBlock<T>::make(rng, c1, c1, th);
    u.att_mid = CrossAttentionBlock<T>::make(rng, c1, d);
    u.res_up1 = ResBlock<T>::make(rng, 2 * c1, c1, th);
    u.att_up1 = CrossAttentionBlock<T>::make(rng, c1, d);
    u.res_up0 = ResBlock<T>::make(rng, c1 + c0, c0, th);
    u.att_up0 = CrossAttentionBlock<T>::make(rng, c0, d);
    u.norm_out = GroupNormLayer<T>::make(c0, 4);
    u.conv_out = Conv2dLayer<T>::make(rng, c0, cfg.latent_channels, 3, 1, 0.1);
    return u;
  }

  BasicTensor<T> forward(const BasicTensor<T>& input, int timestep, const GuidanceInput<T>& guides) const {
    BasicTensor<T> temb = time2(silu(time1(timestep_embedding<T>(timestep, time_dim))));
    BasicTensor<T> h = conv_in(input);
    BasicTensor<T> skip0 = att_down0(res_down0(h, temb), guides);
    h = down0(skip0);
    BasicTensor<T> skip1 = att_down1(res_down1(h, temb), guides);
    h = down1(skip1);
    h = att_mid(res_mid(h, temb), guides);
    h = att_up1(res_up1(concat0<T>({upsample2x(h), skip1}), temb), guides);
    h = att_up0(res_up0(concat0<T>({upsample2x(h), skip0}), temb), guides);
    return conv_out(silu(norm_out(h)));
  }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    time1.collect(out, prefix + ".time1");
    time2.collect(out, prefix + ".time2");
    conv_in.collect(out, prefix + ".conv_in");
    res_down0.collect(out, prefix + ".res_down0");
    att_down0.collect(out, prefix + ".att_down0");
    down0.collect(out, prefix + ".down0");
    res_down1.collect(out, prefix + ".res_down1");
    att_down1.collect(out, prefix + ".att_down1");
    down1.collect(out, prefix + ".down1");
    res_mid.collect(out, prefix + ".res_mid");
    att_mid.collect(out, prefix + ".att_mid");
    res_up1.collect(out, prefix + ".res_up1");
    att_up1.collect(out, prefix + ".att_up1");
    res_up0.collect(out, prefix + ".res_up0");
    att_up0.collect(out, prefix + ".att_up0");
    norm_out.collect(out, prefix + ".norm_out");
    conv_out.collect(out, prefix + ".conv_out");
  }
};

/// Noise prediction for a noisy latent at timestep T given the inpainting
/// condition and the frame's guidance tokens.
template <class T>
BasicTensor<T> unet_predict_noise(const UNet<T>& unet, const LatentMap<T>& noisy, int timestep,
                                  const MaskedLatentCond<T>& cond, const GuidanceInput<T>& guides) {
  if (timestep < 1 || timestep > unet.t_max) {
    throw ContractError("timestep " + std::to_string(timestep) + " outside [1, " + std::to_string(unet.t_max) + "]");
  }
  if (cond.occluded() && guides.empty()) {
    throw ContractError("occluded frame is missing its guidance tokens");
  }
  const Shape& s = noisy.values.shape();
  if (cond.context_latent.shape() != s || cond.mask.rank() != 3 || cond.mask.dim(0) != 1 ||
      cond.mask.dim(1) != s.at(1) || cond.mask.dim(2) != s.at(2)) {
    throw DimensionError("conditioning " + shape_str(cond.context_latent.shape()) + " does not match latent " +
                         shape_str(s));
  }
  return unet.forward(concat0<T>({noisy.values, cond.context_latent, cond.mask}), timestep, guides);
}

}  // namespace diffmvr
