#pragma once

#include <cstddef>
#include <vector>

#include "diffmvr/numerics/tensor.hpp"

namespace diffmvr {

/// Frames v_t ([c x p x p], values in [0,1]) with binary occlusion masks m_t
/// ([1 x p x p], 1 = occluded) and, for synthetic clips, the unoccluded truth.
struct VideoSequence {
  std::vector<Tensor> frames;
  std::vector<Tensor> masks;
  std::vector<Tensor> truth;  // empty when unknown
  double fps = 20.0;

  std::size_t size() const { return frames.size(); }
  std::size_t channels() const { return frames.at(0).dim(0); }
  std::size_t side() const { return frames.at(0).dim(1); }
  bool has_truth() const { return !truth.empty(); }

  /// Fraction of occluded pixels in frame t.
  double coverage(std::size_t t) const;
  bool occluded(std::size_t t) const;

  /// Throws DimensionError/ContractError when the sequence breaks its invariants.
  void validate() const;
};

}  // namespace diffmvr
