#pragma once

#include <cstddef>
#include <optional>

#include "diffmvr/dataio/video.hpp"

namespace diffmvr {

/// Unoccluded context of a frame plus its mask. context * mask == 0 everywhere.
struct MaskedFrame {
  Tensor context;  // (1 - m) * v_t
  Tensor mask;     // m_t, 1 = occluded
};

struct GuidancePair {
  Tensor symmetric;                       // s_t
  Tensor past;                            // v_tbar, or a copy of s_t on fallback
  std::optional<std::size_t> past_index;  // tbar < t
  bool fallback_used = false;
};

struct PastSearch {
  std::optional<std::size_t> index;
  bool fallback = true;
};

/// Default coverage below which a frame counts as unobstructed.
inline constexpr double kDefaultCleanThreshold = 0.01;

MaskedFrame make_masked_frame(const Tensor& frame, const Tensor& mask);

/// Mirror partner of column x about axis a (the line between columns a-1 and a).
inline long mirror_column(long x, long axis) { return 2 * axis - 1 - x; }

/// Column a in [p/4, 3p/4] minimising the mirror MSE over pixel pairs whose
/// members are both unoccluded. Exact ties go to the candidate nearest p/2
/// (the lower one when equidistant).
std::size_t estimate_symmetry_axis(const Tensor& frame, const Tensor& mask);

/// Copy of the frame whose occluded pixels take their mirror partner's value
/// when that partner is in frame and unoccluded, else 0.
Tensor make_symmetric_guide(const Tensor& frame, const Tensor& mask, std::size_t axis);

/// Largest index tbar < t (0-based) whose coverage is below `threshold`.
PastSearch find_past_unobstructed(const VideoSequence& video, std::size_t t,
                                  double threshold = kDefaultCleanThreshold);

/// Both guides for occluded frame t (0-based). Throws ContractError when the
/// frame is unoccluded and GuidanceError when too little is visible.
GuidancePair build_guidance(const VideoSequence& video, std::size_t t,
                            double threshold = kDefaultCleanThreshold);

}  // namespace diffmvr
