#pragma once

#include <cstdint>
#include <vector>

#include "diffmvr/diffusion/train.hpp"

namespace diffmvr {

struct InpaintConfig {
  std::uint64_t seed = 0;
  GuidanceMode mode = GuidanceMode::kDual;
  bool shared_noise = true;  // one initial noise tensor for the whole clip
  double clean_threshold = kDefaultCleanThreshold;
};

struct InpaintResult {
  VideoSequence video;                   // composited frames, original masks and truth
  std::vector<GuideImages<float>> guides;  // per frame; empty tensors for pass-through frames
  std::vector<bool> restored;
};

/// Reverse diffusion from T_max down to 1 for every occluded frame, VAE
/// decode, then (1 - m) v + m decoded. Unoccluded frames are copied untouched.
InpaintResult inpaint_clip(const VideoSequence& video, const ModelParams<float>& params, const NoiseSchedule& sched,
                           const InpaintConfig& cfg);

/// (1 - m) v + m x, per pixel.
Tensor composite(const Tensor& frame, const Tensor& mask, const Tensor& fill);

}  // namespace diffmvr
