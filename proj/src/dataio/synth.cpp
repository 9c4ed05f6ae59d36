#include "diffmvr/dataio/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "diffmvr/numerics/rng.hpp"

namespace diffmvr {

namespace {

using Rgb = std::array<double, 3>;

Rgb random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

struct FaceStyle {
  Rgb skin, eye, mouth, bg_top, bg_bottom;
  double radius, eye_dx, eye_dy, eye_r, mouth_y, mouth_half, mouth_thick, stripe_freq;
};

struct OccluderStyle {
  Rgb color;
  double side_sign, offset, drift, y_offset, width_frac, aspect;
};

std::vector<double> generated_schedule(const SynthConfig& cfg, Rng& rng) {
  std::vector<double> cov(cfg.frames, 0.0);
  const double phase = rng.uniform(0.0, 6.283185307179586);
  for (std::size_t t = 1; t < cfg.frames; ++t) {
    const bool clean = rng.uniform() < 0.15;
    const double wave = 0.65 + 0.35 * std::sin(phase + 0.8 * static_cast<double>(t));
    cov[t] = clean ? 0.0 : cfg.max_coverage * wave;
  }
  return cov;
}

// Texture of the symmetric face, a function of |dx| and dy only.
Rgb face_color(const FaceStyle& f, double adx, double dy) {
  const double d2 = (adx * adx + dy * dy) / (f.radius * f.radius);
  const double shade = 1.0 - 0.25 * d2 + 0.05 * std::cos(f.stripe_freq * adx);
  Rgb c{f.skin[0] * shade, f.skin[1] * shade, f.skin[2] * shade};
  const double ex = adx - f.eye_dx, ey = dy - f.eye_dy;
  if (ex * ex + ey * ey <= f.eye_r * f.eye_r) c = f.eye;
  if (dy >= f.mouth_y && dy < f.mouth_y + f.mouth_thick && adx < f.mouth_half) c = f.mouth;
  for (double& v : c) v = std::clamp(v, 0.0, 1.0);
  return c;
}

}  // namespace

bool occluder_contains(const FrameGeometry& g, int x, int y) {
  if (g.target_coverage <= 0.0) return false;
  if (g.occluder == MaskStyle::kRectangle) {
    return x >= g.rect_x0 && x < g.rect_x0 + g.rect_w && y >= g.rect_y0 && y < g.rect_y0 + g.rect_h;
  }
  const double u = (x + 0.5 - g.ell_cx) / g.ell_a;
  const double v = (y + 0.5 - g.ell_cy) / g.ell_b;
  return u * u + v * v <= 1.0;
}

namespace {

std::size_t ellipse_count(const FrameGeometry& g, int side) {
  std::size_t n = 0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) n += occluder_contains(g, x, y) ? 1 : 0;
  }
  return n;
}

}  // namespace

GeneratedClip generate_clip_with_geometry(const SynthConfig& cfg) {
  if (cfg.side < 8) throw ConfigError("synthetic frame side must be at least 8");
  if (cfg.frames == 0) throw ConfigError("synthetic clip needs at least one frame");
  if (cfg.channels != 1 && cfg.channels != 3) throw ConfigError("channels must be 1 or 3");
  if (cfg.max_coverage < 0.0 || cfg.max_coverage > kMaxCoverage) {
    throw ConfigError("max_coverage must lie in [0, 0.5]");
  }

  Rng rng(cfg.seed);
  std::vector<double> cov = cfg.coverage.empty() ? generated_schedule(cfg, rng) : cfg.coverage;
  if (cov.size() != cfg.frames) {
    throw ConfigError("coverage schedule has " + std::to_string(cov.size()) + " entries for " +
                      std::to_string(cfg.frames) + " frames");
  }
  bool has_clean = false;
  for (double c : cov) {
    if (!(c >= 0.0 && c <= kMaxCoverage)) {
      throw ConfigError("coverage " + std::to_string(c) + " outside [0, 0.5]");
    }
    has_clean = has_clean || c < cfg.clean_threshold;
  }
  if (!has_clean) throw ConfigError("coverage schedule has no unobstructed frame");

  const int side = static_cast<int>(cfg.side);
  const double p = static_cast<double>(cfg.side);

  FaceStyle face;
  face.skin = random_color(rng, 0.55, 0.9);
  face.eye = random_color(rng, 0.05, 0.3);
  face.mouth = {rng.uniform(0.5, 0.8), rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3)};
  face.bg_top = random_color(rng, 0.1, 0.6);
  face.bg_bottom = random_color(rng, 0.1, 0.6);
  face.radius = p * rng.uniform(0.26, 0.32);
  face.eye_dx = face.radius * rng.uniform(0.35, 0.5);
  face.eye_dy = -face.radius * rng.uniform(0.2, 0.35);
  face.eye_r = face.radius * rng.uniform(0.14, 0.2);
  face.mouth_y = face.radius * rng.uniform(0.3, 0.45);
  face.mouth_half = face.radius * rng.uniform(0.3, 0.5);
  face.mouth_thick = std::max(1.0, face.radius * 0.15);
  face.stripe_freq = rng.uniform(0.5, 1.5);

  OccluderStyle occ;
  occ.color = random_color(rng, 0.2, 0.95);
  occ.side_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  occ.offset = face.radius * rng.uniform(0.45, 0.65);
  occ.drift = rng.uniform(-0.6, 0.6);
  occ.y_offset = rng.uniform(-0.2, 0.2) * face.radius;
  occ.width_frac = rng.uniform(0.28, 0.4);
  occ.aspect = rng.uniform(0.6, 1.4);

  const double amp_x = std::min(2.0, p / 16.0);
  const double omega = rng.uniform(0.4, 0.9);
  const double phase_x = rng.uniform(0.0, 6.283185307179586);
  const double phase_y = rng.uniform(0.0, 6.283185307179586);

  GeneratedClip clip;
  clip.video.fps = cfg.fps;
  const std::size_t plane = cfg.side * cfg.side;
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const double tt = static_cast<double>(t);
    FrameGeometry g;
    g.axis = static_cast<int>(std::lround(p / 2.0 + amp_x * std::sin(omega * tt + phase_x)));
    g.center_y = p / 2.0 + 1.5 * std::sin(0.5 * omega * tt + phase_y);
    g.radius = face.radius;
    g.occluder = cfg.mask_style;
    g.target_coverage = cov[t];

    std::vector<float> truth(cfg.channels * plane);
    for (int y = 0; y < side; ++y) {
      const double dy = y + 0.5 - g.center_y;
      const double grade = static_cast<double>(y) / (p - 1.0);
      for (int x = 0; x < side; ++x) {
        const double dx = x + 0.5 - g.axis;
        Rgb c;
        if (dx * dx + dy * dy <= face.radius * face.radius) {
          c = face_color(face, std::abs(dx), dy);
        } else {
          for (int k = 0; k < 3; ++k) c[k] = face.bg_top[k] + (face.bg_bottom[k] - face.bg_top[k]) * grade;
        }
        for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
          const double v = cfg.channels == 1 ? (c[0] + c[1] + c[2]) / 3.0 : c[ch];
          truth[ch * plane + static_cast<std::size_t>(y * side + x)] = static_cast<float>(v);
        }
      }
    }

    std::vector<float> mask(plane, 0.0f);
    if (cov[t] > 0.0) {
      const double target = cov[t] * p * p;
      const double cx = g.axis + occ.side_sign * occ.offset + occ.drift * tt;
      const double cy = g.center_y + occ.y_offset;
      if (cfg.mask_style == MaskStyle::kRectangle) {
        int w = std::max(1, static_cast<int>(std::lround(occ.width_frac * p)));
        w = std::max(w, static_cast<int>(std::ceil(target / p)));
        int h = std::max(1, static_cast<int>(std::lround(target / w)));
        if (w > side || h > side) throw ConfigError("coverage too large for a rectangular occluder");
        g.rect_w = w;
        g.rect_h = h;
        g.rect_x0 = std::clamp(static_cast<int>(std::lround(cx - w / 2.0)), 0, side - w);
        g.rect_y0 = std::clamp(static_cast<int>(std::lround(cy - h / 2.0)), 0, side - h);
      } else {
        g.ell_cx = std::clamp(cx, 0.0, p);
        g.ell_cy = std::clamp(cy, 0.0, p);
        // Bisect the scale so the in-frame pixel count tracks the target.
        double lo = 0.0, hi = 2.0 * p;
        double best_scale = hi;
        double best_err = 1e300;
        for (int it = 0; it < 48; ++it) {
          const double s = 0.5 * (lo + hi);
          g.ell_a = s * occ.aspect;
          g.ell_b = s / occ.aspect;
          const double n = static_cast<double>(ellipse_count(g, side));
          if (std::abs(n - target) < best_err) {
            best_err = std::abs(n - target);
            best_scale = s;
          }
          (n < target ? lo : hi) = s;
        }
        g.ell_a = best_scale * occ.aspect;
        g.ell_b = best_scale / occ.aspect;
        if (ellipse_count(g, side) == 0) {
          throw ConfigError("coverage " + std::to_string(cov[t]) + " too small to realize");
        }
      }
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          if (occluder_contains(g, x, y)) mask[static_cast<std::size_t>(y * side + x)] = 1.0f;
        }
      }
    }

    std::vector<float> frame = truth;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const auto idx = static_cast<std::size_t>(y * side + x);
        if (mask[idx] == 0.0f) continue;
        const double tex = 0.85 + 0.15 * std::sin(0.9 * (x - y) + tt);
        for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
          const double base = cfg.channels == 1 ? (occ.color[0] + occ.color[1] + occ.color[2]) / 3.0
                                                : occ.color[ch];
          frame[ch * plane + idx] = static_cast<float>(std::clamp(base * tex, 0.0, 1.0));
        }
      }
    }

    const Shape shape{cfg.channels, cfg.side, cfg.side};
    clip.video.truth.push_back(Tensor::from(shape, std::move(truth)));
    clip.video.frames.push_back(Tensor::from(shape, std::move(frame)));
    clip.video.masks.push_back(Tensor::from(Shape{1, cfg.side, cfg.side}, std::move(mask)));
    clip.geometry.push_back(g);
  }
  return clip;
}

}  // namespace diffmvr
