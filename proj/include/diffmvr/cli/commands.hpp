#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "diffmvr/diffusion/inpaint.hpp"
#include "diffmvr/metrics/metrics.hpp"

namespace diffmvr {

struct RunConfig {
  std::filesystem::path out = "out";
  std::filesystem::path data;        // dataset root written by gen
  std::filesystem::path checkpoint;  // trained model
  std::filesystem::path vae;         // VAE-only checkpoint; pretrained in-process when empty
  std::filesystem::path inpainted;   // output of inpaint, for eval
  std::string split = "test";
  std::uint64_t seed = 0;
  bool force = false;

  // gen
  std::size_t clips = 200;
  std::size_t side = 32;
  std::size_t frames = 8;
  double max_coverage = 0.22;

  // schedule
  int t_max = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // training
  int steps = 2000;
  double lr = 1e-3;
  int vae_steps = 1500;
  double vae_lr = 2e-3;
  int checkpoint_every = 0;
  GuidanceMode guidance = GuidanceMode::kDual;
  bool guidance_set = false;  // explicit --guidance overrides the checkpoint's mode
  bool motion_loss = true;
  double lambda = 0.1;
  double alpha1 = 0.5;  // alpha2 = 1 - alpha1
  double clean_threshold = kDefaultCleanThreshold;

  // ablation
  int ablate_steps = 600;
  std::size_t workers = 1;
};

/// Train/val/test sizes for n clips: round(0.7 n), round(0.1 n), remainder.
struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};
SplitSizes split_sizes(std::size_t n);

/// Seed of clip i of a dataset generated under `seed`.
std::uint64_t clip_seed(std::uint64_t seed, std::size_t index);

struct LoadedSplit {
  std::vector<std::string> ids;
  std::vector<VideoSequence> clips;
};
LoadedSplit load_split(const std::filesystem::path& data, const std::string& split);

NoiseSchedule schedule_for(const RunConfig& cfg);
ModelConfig model_config_for(const RunConfig& cfg);

/// Writes clips/clip_%04d, manifest.tsv and train/val/test.tsv under cfg.out.
void cmd_gen(const RunConfig& cfg);
/// Writes vae.ckpt and vae_loss.csv under cfg.out.
void cmd_pretrain_vae(const RunConfig& cfg);
/// Writes model.ckpt, loss.csv and loss_by_timestep.csv under cfg.out.
void cmd_train(const RunConfig& cfg);
/// Writes clips/<id> (raw tensors), grids/<id>.png and manifest.tsv under cfg.out.
void cmd_inpaint(const RunConfig& cfg);
/// Writes report.csv and report.txt under cfg.out.
MetricReport cmd_eval(const RunConfig& cfg);

struct AblationRow {
  std::string table;   // "components" or "guides"
  std::string label;
  GuidanceMode guidance = GuidanceMode::kDual;
  bool motion_loss = true;
  std::optional<MetricReport> report;  // empty when the run failed
  std::string failure;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string format() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// The four configurations of the component study followed by the three
/// single-guide variants, in table order.
std::vector<AblationRow> ablation_plan();

/// Trains and evaluates every row (concurrently up to cfg.workers), all under
/// cfg.seed. Writes ablation.csv and ablation.txt under cfg.out.
AblationTable cmd_ablate(const RunConfig& cfg);

/// (variant - reference) / reference.
double relative_change(double variant, double reference);

/// Process exit code for an exception escaping a subcommand.
int exit_code_for(const std::exception& e);

}  // namespace diffmvr
