#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "diffmvr/dataio/video.hpp"
#include "diffmvr/models/model_params.hpp"

namespace diffmvr {

inline constexpr std::size_t kSsimWindow = 7;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over every valid 7x7 window (no padding) and channel, uniform
/// weights, unit dynamic range. Inputs [c x h x w] with h, w >= 7.
double ssim(const Tensor& a, const Tensor& b);

/// SSIM restricted to windows that contain at least one masked pixel; equals
/// ssim() when the mask is empty.
double ssim_masked(const Tensor& a, const Tensor& b, const Tensor& mask);

/// Mean over consecutive pairs of the RMS frame difference inside the union
/// of both masks, or over the whole frame when the clip has no masks. Pairs
/// whose union is empty are skipped; a clip with none left scores 0.
double tc_score(const VideoSequence& video);

using FeatureSet = std::vector<std::vector<double>>;

/// Frechet distance between Gaussian fits of two feature sets (unbiased
/// covariances). Covariances get 1e-6 I added when a side has <= d samples.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

/// Closed form for 1-D Gaussians: (m1 - m2)^2 + (s1 - s2)^2.
double frechet_gaussian_1d(double mean_a, double std_a, double mean_b, double std_b);

enum class FeatureLevel { kFrame, kVideo };

inline constexpr std::size_t kVideoFeatureFrames = 4;

/// Frame level: symmetric-guide encoder embedding of each frame (p_e values).
/// Video level: embeddings of kVideoFeatureFrames evenly strided frames,
/// concatenated (kVideoFeatureFrames * p_e values) per clip.
FeatureSet extract_features(const std::vector<VideoSequence>& clips, const ModelParams<float>& encoder,
                            FeatureLevel level);

struct ClipMetrics {
  std::string clip_id;
  double ssim = 0.0;         // mean over frames, whole frame
  double ssim_masked = 0.0;  // mean over occluded frames
  double tc = 0.0;           // of the inpainted clip
  double tc_truth = 0.0;     // of the ground truth with the same masks
  double fid_proxy = 0.0;    // frame features of this clip against its truth
};

/// Frame-level columns follow the FID/SSIM/TC order; video-level columns the
/// mean-FID/mean-SSIM/mean-TC/FVD order.
struct MetricReport {
  std::vector<ClipMetrics> clips;
  double fid_proxy = 0.0;
  double ssim = 0.0;
  double ssim_masked = 0.0;
  double tc = 0.0;
  double tc_truth = 0.0;
  double video_fid_proxy = 0.0;
  double video_ssim = 0.0;
  double video_tc = 0.0;
  double fvd_proxy = 0.0;
  std::string fingerprint;
};

/// The truth of a synthetic clip as its own sequence (frames = truth, same masks).
VideoSequence truth_sequence(const VideoSequence& clip);

/// inpainted[i] is scored against truth[i]; both share masks.
MetricReport evaluate(const std::vector<VideoSequence>& inpainted, const std::vector<VideoSequence>& truth,
                      const ModelParams<float>& encoder, const std::vector<std::string>& clip_ids = {},
                      const std::string& fingerprint = "");

void write_report_csv(const MetricReport& report, const std::filesystem::path& path);
std::string format_report_table(const MetricReport& report);

}  // namespace diffmvr
