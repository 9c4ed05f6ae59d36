#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diffmvr/diffusion/schedule.hpp"
#include "diffmvr/models/model_params.hpp"

namespace diffmvr {

/// Which guidance reaches the cross-attention layers.
///   kDual      symmetric guide -> sym encoder, past guide -> past encoder, alpha from params
///   kSymmetric symmetric guide only
///   kPast      past guide only
///   kPresent   the occluded frame itself in both slots, alpha = (0.5, 0.5)
enum class GuidanceMode { kDual, kSymmetric, kPast, kPresent };

GuidanceMode parse_guidance_mode(const std::string& name);
std::string guidance_mode_name(GuidanceMode mode);

/// Guide images for one frame; which ones are used depends on the mode.
template <class T>
struct GuideImages {
  BasicTensor<T> symmetric;
  BasicTensor<T> past;
  BasicTensor<T> present;
};

template <class T>
GuidanceInput<T> make_guidance_input(const ModelParams<T>& params, GuidanceMode mode, const GuideImages<T>& images) {
  GuidanceInput<T> in;
  switch (mode) {
    case GuidanceMode::kDual: {
      const auto [a1, a2] = params.normalized_alpha();
      in.alpha1 = a1;
      in.alpha2 = a2;
      if (a1 > 0.0) in.first = guidance_tokens(params, images.symmetric, GuidanceSource::kSymmetric);
      if (a2 > 0.0) {
        auto past = guidance_tokens(params, images.past, GuidanceSource::kPast);
        if (in.first) {
          in.second = std::move(past);
        } else {
          in.first = std::move(past);
          in.alpha1 = 1.0;
          in.alpha2 = 0.0;
        }
      }
      break;
    }
    case GuidanceMode::kSymmetric:
      in.first = guidance_tokens(params, images.symmetric, GuidanceSource::kSymmetric);
      break;
    case GuidanceMode::kPast:
      in.first = guidance_tokens(params, images.past, GuidanceSource::kPast);
      break;
    case GuidanceMode::kPresent:
      in.first = guidance_tokens(params, images.present, GuidanceSource::kSymmetric);
      in.second = guidance_tokens(params, images.present, GuidanceSource::kPast);
      in.alpha1 = 0.5;
      in.alpha2 = 0.5;
      break;
  }
  return in;
}

/// One frame of a training clip. `eps` is the frame's own noise draw.
template <class T>
struct FrameInputs {
  LatentMap<T> clean;
  MaskedLatentCond<T> cond;
  GuideImages<T> guides;
  BasicTensor<T> eps;
};

/// F consecutive frames that share one timestep.
template <class T>
struct ClipBatch {
  int timestep = 1;
  std::vector<FrameInputs<T>> frames;
};

template <class T>
struct LossTerms {
  BasicTensor<T> total;
  BasicTensor<T> diff;
  BasicTensor<T> motion;
};

/// Mean over frames of ||eps - eps_hat||^2 (summed over latent elements).
template <class T>
BasicTensor<T> loss_diff(const std::vector<BasicTensor<T>>& eps, const std::vector<BasicTensor<T>>& eps_hat) {
  if (eps.empty() || eps.size() != eps_hat.size()) {
    throw ContractError("loss_diff needs one prediction per noise draw");
  }
  BasicTensor<T> acc = sum_squares(sub(eps[0], eps_hat[0]));
  for (std::size_t i = 1; i < eps.size(); ++i) acc = add(acc, sum_squares(sub(eps[i], eps_hat[i])));
  return scale(acc, static_cast<T>(1.0 / static_cast<double>(eps.size())));
}

/// (2/F) * sum over the F-1 consecutive pairs of ||y_t - y_{t-1}||^2.
template <class T>
BasicTensor<T> loss_motion(const std::vector<BasicTensor<T>>& latents) {
  if (latents.size() < 2) throw ContractError("loss_motion needs at least two frames");
  BasicTensor<T> acc = sum_squares(sub(latents[1], latents[0]));
  for (std::size_t i = 2; i < latents.size(); ++i) acc = add(acc, sum_squares(sub(latents[i], latents[i - 1])));
  return scale(acc, static_cast<T>(2.0 / static_cast<double>(latents.size())));
}

template <class T>
BasicTensor<T> loss_motion(const std::vector<LatentMap<T>>& noisy) {
  if (noisy.size() < 2) throw ContractError("loss_motion needs at least two frames");
  std::vector<BasicTensor<T>> values;
  for (const auto& y : noisy) {
    if (y.timestep != noisy.front().timestep) throw ContractError("loss_motion: frames carry different timesteps");
    values.push_back(y.values);
  }
  return loss_motion(values);
}

template <class T>
std::vector<LatentMap<T>> noisy_latents(const ClipBatch<T>& batch, const NoiseSchedule& sched) {
  std::vector<LatentMap<T>> out;
  out.reserve(batch.frames.size());
  for (const auto& f : batch.frames) out.push_back(forward_diffuse(f.clean, batch.timestep, f.eps, sched));
  return out;
}

template <class T>
BasicTensor<T> loss_motion(const ClipBatch<T>& batch, const NoiseSchedule& sched) {
  return loss_motion(noisy_latents(batch, sched));
}

template <class T>
BasicTensor<T> loss_diff(const ClipBatch<T>& batch, const ModelParams<T>& params, const NoiseSchedule& sched,
                         GuidanceMode mode) {
  std::vector<BasicTensor<T>> eps, eps_hat;
  const auto noisy = noisy_latents(batch, sched);
  for (std::size_t i = 0; i < batch.frames.size(); ++i) {
    const auto& f = batch.frames[i];
    eps.push_back(f.eps);
    eps_hat.push_back(
        unet_predict_noise(params.unet, noisy[i], batch.timestep, f.cond, make_guidance_input(params, mode, f.guides)));
  }
  return loss_diff(eps, eps_hat);
}

/// L_diff + lambda * L_motion. With `motion_on` false the motion term is
/// still reported but left out of the total.
template <class T>
LossTerms<T> loss_total(const ClipBatch<T>& batch, const ModelParams<T>& params, const NoiseSchedule& sched,
                        GuidanceMode mode, double lambda, bool motion_on = true) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  LossTerms<T> terms;
  terms.diff = loss_diff(batch, params, sched, mode);
  terms.motion = loss_motion(batch, sched);
  terms.total = motion_on ? add(terms.diff, scale(terms.motion, static_cast<T>(lambda))) : terms.diff;
  return terms;
}

}  // namespace diffmvr
