#include "diffmvr/dataio/video.hpp"

#include <string>

namespace diffmvr {

double VideoSequence::coverage(std::size_t t) const {
  const auto& m = masks.at(t);
  double total = 0.0;
  for (float v : m.data()) total += v;
  return total / static_cast<double>(m.numel());
}

bool VideoSequence::occluded(std::size_t t) const {
  for (float v : masks.at(t).data()) {
    if (v != 0.0f) return true;
  }
  return false;
}

void VideoSequence::validate() const {
  if (frames.empty()) throw ContractError("video has no frames");
  if (masks.size() != frames.size()) throw ContractError("video masks do not align with frames");
  if (!truth.empty() && truth.size() != frames.size()) {
    throw ContractError("video truth does not align with frames");
  }
  const Shape& shape = frames[0].shape();
  if (shape.size() != 3 || shape[1] != shape[2]) {
    throw DimensionError("frames must be [c x p x p], got " + shape_str(shape));
  }
  const Shape mask_shape{1, shape[1], shape[2]};
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].shape() != shape) throw DimensionError("frame " + std::to_string(t) + " changes shape");
    if (masks[t].shape() != mask_shape) throw DimensionError("mask " + std::to_string(t) + " has wrong shape");
    if (!truth.empty() && truth[t].shape() != shape) {
      throw DimensionError("truth " + std::to_string(t) + " has wrong shape");
    }
    for (float v : masks[t].data()) {
      if (v != 0.0f && v != 1.0f) throw ContractError("mask " + std::to_string(t) + " is not binary");
    }
  }
}

}  // namespace diffmvr
