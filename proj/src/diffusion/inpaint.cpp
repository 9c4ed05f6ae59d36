#include "diffmvr/diffusion/inpaint.hpp"

namespace diffmvr {

Tensor composite(const Tensor& frame, const Tensor& mask, const Tensor& fill) {
  detail::require_same_shape(frame, fill, "composite");
  const std::size_t c = frame.dim(0), plane = frame.dim(1) * frame.dim(2);
  if (mask.numel() != plane) throw DimensionError("composite: mask does not match frame");
  std::vector<float> out(frame.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < plane; ++i) {
      const float m = mask[i];
      out[ch * plane + i] = m == 0.0f ? frame[ch * plane + i] : (1.0f - m) * frame[ch * plane + i] + m * fill[ch * plane + i];
    }
  }
  return Tensor::from(frame.shape(), std::move(out));
}

InpaintResult inpaint_clip(const VideoSequence& video, const ModelParams<float>& params, const NoiseSchedule& sched,
                           const InpaintConfig& cfg) {
  video.validate();
  if (sched.t_max != params.config.t_max) throw ConfigError("schedule and model disagree on t_max");
  NoGradGuard no_grad;
  InpaintResult result;
  result.video = video;
  result.guides.resize(video.size());
  result.restored.assign(video.size(), false);

  const Shape latent_shape{params.config.latent_channels, params.config.latent_side(), params.config.latent_side()};
  Rng rng(cfg.seed);
  const Tensor shared = rng.normal_tensor<float>(latent_shape);

  for (std::size_t t = 0; t < video.size(); ++t) {
    if (!video.occluded(t)) continue;
    const MaskedLatentCond<float> cond = make_condition(params.vae, video.frames[t], video.masks[t]);
    result.guides[t] = frame_guides(video, t, cfg.clean_threshold);
    const GuidanceInput<float> guides = make_guidance_input(params, cfg.mode, result.guides[t]);

    LatentMap<float> y{cfg.shared_noise ? shared : rng.normal_tensor<float>(latent_shape), LatentKind::kNoisy,
                       sched.t_max};
    for (int step = sched.t_max; step >= 1; --step) {
      const Tensor eps_hat = unet_predict_noise(params.unet, y, step, cond, guides);
      const Tensor z = rng.normal_tensor<float>(latent_shape);
      y = reverse_step(y, step, eps_hat, sched, z);
    }
    const Tensor decoded = vae_decode(params.vae, y);
    check_finite(decoded, "decoded frame");
    result.video.frames[t] = composite(video.frames[t], video.masks[t], decoded);
    result.restored[t] = true;
  }
  return result;
}

}  // namespace diffmvr
