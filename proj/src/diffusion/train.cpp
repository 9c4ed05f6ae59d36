#include "diffmvr/diffusion/train.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "diffmvr/models/checkpoint.hpp"
#include "diffmvr/preprocess/guidance.hpp"

namespace diffmvr {

GuideImages<float> frame_guides(const VideoSequence& video, std::size_t t, double clean_threshold) {
  GuideImages<float> g;
  g.present = video.frames.at(t);
  if (video.occluded(t)) {
    GuidancePair pair = build_guidance(video, t, clean_threshold);
    g.symmetric = pair.symmetric;
    g.past = pair.past;
  } else {
    g.symmetric = video.frames[t];
    const PastSearch past = find_past_unobstructed(video, t, clean_threshold);
    g.past = past.index ? video.frames[*past.index] : video.frames[t];
  }
  return g;
}

MaskedLatentCond<float> make_condition(const Vae<float>& vae, const Tensor& frame, const Tensor& mask) {
  NoGradGuard no_grad;
  const MaskedFrame masked = make_masked_frame(frame, mask);
  const std::size_t factor = frame.dim(1) / (frame.dim(1) / 4);
  return {vae_encode(vae, masked.context).values, avg_pool(mask, factor)};
}

PreparedClip prepare_clip(const Vae<float>& vae, const VideoSequence& video, double clean_threshold) {
  if (!video.has_truth()) throw ContractError("training clips need ground-truth frames");
  NoGradGuard no_grad;
  PreparedClip clip;
  for (std::size_t t = 0; t < video.size(); ++t) {
    clip.clean.push_back(vae_encode(vae, video.truth[t]));
    clip.cond.push_back(make_condition(vae, video.frames[t], video.masks[t]));
    clip.guides.push_back(frame_guides(video, t, clean_threshold));
  }
  return clip;
}

namespace {

void dump_nan_state(const TrainConfig& cfg, const StepRecord& rec, const ModelParams<float>& params) {
  if (cfg.checkpoint_dir.empty()) return;
  nlohmann::json dump;
  dump["step"] = rec.step;
  dump["timestep"] = rec.timestep;
  dump["clip"] = rec.clip;
  dump["loss_total"] = std::isfinite(rec.total) ? nlohmann::json(rec.total) : nlohmann::json("non-finite");
  dump["loss_diff"] = std::isfinite(rec.diff) ? nlohmann::json(rec.diff) : nlohmann::json("non-finite");
  dump["loss_motion"] = std::isfinite(rec.motion) ? nlohmann::json(rec.motion) : nlohmann::json("non-finite");
  dump["non_finite_parameters"] = nlohmann::json::array();
  for (const auto& p : params.all_parameters()) {
    if (!p.tensor.all_finite()) dump["non_finite_parameters"].push_back(p.name);
  }
  std::filesystem::create_directories(cfg.checkpoint_dir);
  std::ofstream(cfg.checkpoint_dir / "nan_dump.json") << dump.dump(2) << '\n';
}

}  // namespace

TrainReport train(const std::vector<VideoSequence>& dataset, ModelParams<float>& params, const NoiseSchedule& sched,
                  const TrainConfig& cfg, const std::function<void(const StepRecord&)>& on_step) {
  if (dataset.empty()) throw ConfigError("training set is empty");
  if (cfg.steps < 0) throw ConfigError("steps must be non-negative");
  if (sched.t_max != params.config.t_max) throw ConfigError("schedule and model disagree on t_max");

  std::vector<PreparedClip> clips;
  clips.reserve(dataset.size());
  for (const auto& v : dataset) clips.push_back(prepare_clip(params.vae, v, cfg.clean_threshold));

  ParamList<float> trainable = params.diffusion_parameters();
  Adam<float> adam(trainable, AdamConfig{cfg.lr});
  Rng rng(cfg.seed);
  TrainReport report;
  report.t_max = sched.t_max;

  for (int step = 1; step <= cfg.steps; ++step) {
    const std::size_t index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(clips.size()) - 1));
    const PreparedClip& clip = clips[index];
    ClipBatch<float> batch;
    batch.timestep = static_cast<int>(rng.uniform_int(1, sched.t_max));
    for (std::size_t t = 0; t < clip.clean.size(); ++t) {
      batch.frames.push_back(
          {clip.clean[t], clip.cond[t], clip.guides[t], rng.normal_tensor<float>(clip.clean[t].values.shape())});
    }

    zero_grads(trainable);
    LossTerms<float> loss = loss_total(batch, params, sched, cfg.mode, params.lambda, cfg.motion_loss);
    StepRecord rec{step, batch.timestep, index, loss.total.item(), loss.diff.item(), loss.motion.item()};
    if (!std::isfinite(rec.total) || !std::isfinite(rec.diff) || !std::isfinite(rec.motion)) {
      dump_nan_state(cfg, rec, params);
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }
    backward(loss.total);
    adam.step();
    report.steps.push_back(rec);
    if (on_step) on_step(rec);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && !cfg.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d.ckpt", step);
      save_checkpoint(cfg.checkpoint_dir / name, params, sched.hash(), {{"step", step}});
    }
  }
  return report;
}

void write_loss_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "step,loss_total,loss_diff,loss_motion\n";
  for (const auto& r : report.steps) out << r.step << ',' << r.total << ',' << r.diff << ',' << r.motion << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void write_loss_by_timestep(const TrainReport& report, const std::filesystem::path& path) {
  struct Acc {
    std::size_t n = 0;
    double total = 0, diff = 0, motion = 0;
  };
  std::map<int, Acc> by_t;
  for (const auto& r : report.steps) {
    Acc& a = by_t[r.timestep];
    ++a.n;
    a.total += r.total;
    a.diff += r.diff;
    a.motion += r.motion;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "timestep,count,mean_loss_total,mean_loss_diff,mean_loss_motion\n";
  for (const auto& [t, a] : by_t) {
    out << t << ',' << a.n << ',' << a.total / a.n << ',' << a.diff / a.n << ',' << a.motion / a.n << '\n';
  }
}

double mean_total(const TrainReport& report, int first, int last) {
  double acc = 0.0;
  int n = 0;
  for (const auto& r : report.steps) {
    if (r.step >= first && r.step <= last) {
      acc += r.total;
      ++n;
    }
  }
  if (n == 0) throw ContractError("no steps in the requested range");
  return acc / n;
}

VaeTrainReport pretrain_vae(const std::vector<VideoSequence>& dataset, ModelParams<float>& params,
                            const VaeTrainConfig& cfg) {
  std::vector<Tensor> frames;
  for (const auto& v : dataset) {
    if (!v.has_truth()) throw ContractError("VAE pretraining needs ground-truth frames");
    frames.insert(frames.end(), v.truth.begin(), v.truth.end());
  }
  if (frames.empty()) throw ConfigError("VAE training set is empty");

  params.vae.latent_scale = 1.0;
  ParamList<float> trainable = params.vae_parameters();
  for (auto& p : trainable) p.tensor.set_requires_grad(true);
  Adam<float> adam(trainable, AdamConfig{cfg.lr});
  Rng rng(cfg.seed);
  VaeTrainReport report;
  for (int step = 1; step <= cfg.steps; ++step) {
    const auto& frame = frames[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(frames.size()) - 1))];
    zero_grads(trainable);
    VaeLoss<float> loss = vae_loss(params.vae, frame, rng, cfg.kl_weight);
    const double value = loss.total.item();
    if (!std::isfinite(value)) throw NumericError("non-finite VAE loss at step " + std::to_string(step));
    backward(loss.total);
    adam.step();
    report.loss.push_back(value);
  }

  NoGradGuard no_grad;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    const Tensor mu = params.vae.moments(f).mean;
    for (float v : mu.data()) {
      sum += v;
      sum_sq += static_cast<double>(v) * v;
      ++n;
    }
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  params.vae.latent_scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  report.latent_scale = params.vae.latent_scale;
  return report;
}

}  // namespace diffmvr
