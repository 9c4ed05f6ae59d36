#include "diffmvr/preprocess/guidance.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace diffmvr {

namespace {

void require_frame_and_mask(const Tensor& frame, const Tensor& mask) {
  if (frame.rank() != 3 || mask.rank() != 3 || mask.dim(0) != 1 || frame.dim(1) != mask.dim(1) ||
      frame.dim(2) != mask.dim(2)) {
    throw DimensionError("frame " + shape_str(frame.shape()) + " and mask " + shape_str(mask.shape()) +
                         " do not align");
  }
}

void require_binary(const Tensor& mask) {
  for (float v : mask.data()) {
    if (v != 0.0f && v != 1.0f) throw ContractError("mask is not binary");
  }
}

}  // namespace

MaskedFrame make_masked_frame(const Tensor& frame, const Tensor& mask) {
  require_frame_and_mask(frame, mask);
  require_binary(mask);
  const std::size_t plane = mask.numel();
  std::vector<float> context(frame.numel());
  for (std::size_t i = 0; i < context.size(); ++i) {
    context[i] = mask[i % plane] == 0.0f ? frame[i] : 0.0f;
  }
  return {Tensor::from(frame.shape(), std::move(context)), mask};
}

std::size_t estimate_symmetry_axis(const Tensor& frame, const Tensor& mask) {
  require_frame_and_mask(frame, mask);
  const std::size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  const std::size_t plane = h * w;
  std::size_t visible = 0;
  for (float v : mask.data()) visible += v == 0.0f ? 1 : 0;
  if (4 * visible < plane) {
    throw GuidanceError("symmetry axis: fewer than 25% of pixels are unoccluded");
  }
  const long center = static_cast<long>(w / 2);
  const long lo = static_cast<long>(w / 4), hi = static_cast<long>(3 * w / 4);
  long best_axis = center;
  double best_mse = std::numeric_limits<double>::infinity();
  long best_dist = std::numeric_limits<long>::max();
  for (long a = lo; a <= hi; ++a) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y < h; ++y) {
      for (long x = 0; x < a; ++x) {
        const long partner = mirror_column(x, a);
        if (partner >= static_cast<long>(w)) continue;
        const std::size_t i = y * w + static_cast<std::size_t>(x);
        const std::size_t j = y * w + static_cast<std::size_t>(partner);
        if (mask[i] != 0.0f || mask[j] != 0.0f) continue;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double d = static_cast<double>(frame[ch * plane + i]) - frame[ch * plane + j];
          total += d * d;
        }
        count += c;
      }
    }
    if (count == 0) continue;
    const double mse = total / static_cast<double>(count);
    const long dist = std::abs(a - center);
    if (mse < best_mse || (mse == best_mse && dist < best_dist)) {
      best_mse = mse;
      best_axis = a;
      best_dist = dist;
    }
  }
  if (!std::isfinite(best_mse)) throw GuidanceError("symmetry axis: no visible mirror pairs");
  return static_cast<std::size_t>(best_axis);
}

Tensor make_symmetric_guide(const Tensor& frame, const Tensor& mask, std::size_t axis) {
  require_frame_and_mask(frame, mask);
  const std::size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  if (axis < w / 4 || axis > 3 * w / 4) {
    throw ContractError("symmetry axis " + std::to_string(axis) + " outside the central half");
  }
  const std::size_t plane = h * w;
  std::vector<float> out(frame.data().begin(), frame.data().end());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      if (mask[i] == 0.0f) continue;
      const long partner = mirror_column(static_cast<long>(x), static_cast<long>(axis));
      const bool usable = partner >= 0 && partner < static_cast<long>(w) &&
                          mask[y * w + static_cast<std::size_t>(partner)] == 0.0f;
      for (std::size_t ch = 0; ch < c; ++ch) {
        out[ch * plane + i] = usable ? frame[ch * plane + y * w + static_cast<std::size_t>(partner)] : 0.0f;
      }
    }
  }
  return Tensor::from(frame.shape(), std::move(out));
}

PastSearch find_past_unobstructed(const VideoSequence& video, std::size_t t, double threshold) {
  PastSearch result;
  for (std::size_t k = std::min(t, video.size()); k-- > 0;) {
    if (video.coverage(k) < threshold) {
      result.index = k;
      result.fallback = false;
      break;
    }
  }
  return result;
}

GuidancePair build_guidance(const VideoSequence& video, std::size_t t, double threshold) {
  if (t >= video.size()) throw ContractError("frame index " + std::to_string(t) + " out of range");
  if (!video.occluded(t)) {
    throw ContractError("guidance requested for unoccluded frame " + std::to_string(t));
  }
  const Tensor& frame = video.frames[t];
  const Tensor& mask = video.masks[t];
  require_binary(mask);
  GuidancePair pair;
  pair.symmetric = make_symmetric_guide(frame, mask, estimate_symmetry_axis(frame, mask));
  const PastSearch past = find_past_unobstructed(video, t, threshold);
  if (past.fallback) {
    pair.past = pair.symmetric;
    pair.fallback_used = true;
  } else {
    pair.past = video.frames[*past.index];
    pair.past_index = past.index;
  }
  return pair;
}

}  // namespace diffmvr
