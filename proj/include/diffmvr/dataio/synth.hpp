#pragma once

#include <cstdint>
#include <vector>

#include "diffmvr/dataio/video.hpp"

namespace diffmvr {

enum class MaskStyle { kRectangle, kEllipse };

/// Synthetic clip recipe: a bilaterally symmetric textured face drifting on a
/// smooth sinusoidal path over a vertically graded background, partly covered
/// by a moving opaque occluder.
struct SynthConfig {
  std::size_t side = 32;
  std::size_t frames = 8;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
  MaskStyle mask_style = MaskStyle::kRectangle;
  /// Explicit per-frame coverage targets. Empty: generated from the seed.
  std::vector<double> coverage;
  double max_coverage = 0.22;
  double clean_threshold = 0.01;
  double fps = 20.0;
};

/// Largest coverage the generator accepts; keeps >= 25% of pixels visible
/// for the symmetry-axis search.
inline constexpr double kMaxCoverage = 0.5;

/// Ground-truth geometry of one generated frame, exposed for oracle tests.
struct FrameGeometry {
  int axis = 0;               // symmetry axis a: mirror(x) = 2a - 1 - x
  double center_y = 0.0;
  double radius = 0.0;
  MaskStyle occluder = MaskStyle::kRectangle;
  // Rectangle: [x0, x0 + w) x [y0, y0 + h). Ellipse: centre and semi-axes.
  int rect_x0 = 0, rect_y0 = 0, rect_w = 0, rect_h = 0;
  double ell_cx = 0.0, ell_cy = 0.0, ell_a = 0.0, ell_b = 0.0;
  double target_coverage = 0.0;
};

struct GeneratedClip {
  VideoSequence video;
  std::vector<FrameGeometry> geometry;
};

/// Deterministic in `cfg` (including its seed). Throws ConfigError for
/// schedules that cannot be realized.
GeneratedClip generate_clip_with_geometry(const SynthConfig& cfg);

inline VideoSequence generate_clip(const SynthConfig& cfg) {
  return generate_clip_with_geometry(cfg).video;
}

/// Whether pixel (x, y) of a frame lies inside the occluder described by `g`.
bool occluder_contains(const FrameGeometry& g, int x, int y);

}  // namespace diffmvr
