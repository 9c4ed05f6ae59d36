#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "diffmvr/dataio/video.hpp"
#include "diffmvr/diffusion/losses.hpp"
#include "diffmvr/preprocess/guidance.hpp"

namespace diffmvr {

/// Everything about a clip that the frozen VAE and the preprocessing fix
/// once: clean target latents, conditioning and guide images.
struct PreparedClip {
  std::vector<LatentMap<float>> clean;
  std::vector<MaskedLatentCond<float>> cond;
  std::vector<GuideImages<float>> guides;
};

/// Guide images for frame t. Occluded frames use build_guidance; unoccluded
/// frames use themselves as the symmetric guide and the latest clean
/// predecessor (or themselves) as the past guide.
GuideImages<float> frame_guides(const VideoSequence& video, std::size_t t, double clean_threshold);

MaskedLatentCond<float> make_condition(const Vae<float>& vae, const Tensor& frame, const Tensor& mask);

/// Target latents come from the truth frames, so the clip must carry truth.
PreparedClip prepare_clip(const Vae<float>& vae, const VideoSequence& video, double clean_threshold);

struct TrainConfig {
  int steps = 2000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  GuidanceMode mode = GuidanceMode::kDual;
  bool motion_loss = true;
  double clean_threshold = kDefaultCleanThreshold;
  int checkpoint_every = 0;             // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;  // also receives the NaN dump
};

struct StepRecord {
  int step = 0;
  int timestep = 0;
  std::size_t clip = 0;
  double total = 0.0;
  double diff = 0.0;
  double motion = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> steps;
  int t_max = 0;
};

/// Adam over the diffusion parameters; the VAE stays frozen. Each step draws
/// a clip, one timestep for the whole clip and one noise tensor per frame.
/// A non-finite loss writes nan_dump.json to checkpoint_dir and throws NumericError.
TrainReport train(const std::vector<VideoSequence>& dataset, ModelParams<float>& params, const NoiseSchedule& sched,
                  const TrainConfig& cfg, const std::function<void(const StepRecord&)>& on_step = {});

void write_loss_csv(const TrainReport& report, const std::filesystem::path& path);
/// timestep,count,mean_loss_total,mean_loss_diff,mean_loss_motion
void write_loss_by_timestep(const TrainReport& report, const std::filesystem::path& path);

/// Mean of loss_total over 1-based steps [first, last].
double mean_total(const TrainReport& report, int first, int last);

struct VaeTrainConfig {
  int steps = 1500;
  double lr = 2e-3;
  double kl_weight = 1e-3;
  std::uint64_t seed = 0;
};

struct VaeTrainReport {
  std::vector<double> loss;
  double latent_scale = 1.0;
};

/// Reconstruction + KL on truth frames, then sets latent_scale = 1/std(mu)
/// over the training frames.
VaeTrainReport pretrain_vae(const std::vector<VideoSequence>& dataset, ModelParams<float>& params,
                            const VaeTrainConfig& cfg);

}  // namespace diffmvr
