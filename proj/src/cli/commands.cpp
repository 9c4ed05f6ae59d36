#include "diffmvr/cli/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "diffmvr/dataio/image_io.hpp"
#include "diffmvr/dataio/manifest.hpp"
#include "diffmvr/dataio/synth.hpp"
#include "diffmvr/models/checkpoint.hpp"

namespace diffmvr {

namespace fs = std::filesystem;

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  s.val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  if (s.train + s.val > n) s.val = n - s.train;
  s.test = n - s.train - s.val;
  return s;
}

std::uint64_t clip_seed(std::uint64_t seed, std::size_t index) {
  Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  return rng.next_u64();
}

LoadedSplit load_split(const fs::path& data, const std::string& split) {
  if (data.empty()) throw ConfigError("no dataset given (--data)");
  const fs::path manifest = data / (split == "all" ? std::string("manifest.tsv") : split + ".tsv");
  LoadedSplit out;
  for (const auto& r : read_manifest(manifest)) out.ids.push_back(r.clip_id);
  out.clips = load_manifest_clips(manifest);
  if (out.clips.empty()) throw ConfigError("split '" + split + "' of " + data.string() + " is empty");
  return out;
}

NoiseSchedule schedule_for(const RunConfig& cfg) { return build_schedule(cfg.t_max, cfg.beta_start, cfg.beta_end); }

ModelConfig model_config_for(const RunConfig& cfg) {
  ModelConfig m;
  m.side = cfg.side;
  m.t_max = cfg.t_max;
  m.validate();
  return m;
}

namespace {

void require_empty_or_force(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
  }
  fs::create_directories(dir);
}

void set_fusion(ModelParams<float>& params, const RunConfig& cfg) {
  if (!(cfg.alpha1 >= 0.0 && cfg.alpha1 <= 1.0)) throw ConfigError("alpha1 must lie in [0, 1]");
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  params.alpha1 = cfg.alpha1;
  params.alpha2 = 1.0 - cfg.alpha1;
  params.lambda = cfg.lambda;
}

void copy_vae(const ModelParams<float>& from, ModelParams<float>& to) {
  auto src = from.vae_parameters();
  auto dst = to.vae_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto out = dst[i].tensor.mutable_data();
    std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), out.begin());
  }
  to.vae.latent_scale = from.vae.latent_scale;
}

/// VAE from cfg.vae, or pretrained on `train` when no file is given.
ModelParams<float> vae_source(const RunConfig& cfg, const std::vector<VideoSequence>& train_clips) {
  ModelParams<float> params = ModelParams<float>::init(model_config_for(cfg), cfg.seed);
  if (!cfg.vae.empty()) {
    if (!fs::exists(cfg.vae)) throw ConfigError("VAE checkpoint " + cfg.vae.string() + " not found");
    load_checkpoint_into(params, cfg.vae);
    return params;
  }
  VaeTrainConfig vc;
  vc.steps = cfg.vae_steps;
  vc.lr = cfg.vae_lr;
  vc.seed = cfg.seed;
  pretrain_vae(train_clips, params, vc);
  return params;
}

ModelParams<float> train_model(const RunConfig& cfg, const std::vector<VideoSequence>& train_clips,
                               const ModelParams<float>& vae, GuidanceMode mode, bool motion, int steps,
                               TrainReport* report, const fs::path& checkpoint_dir, bool verbose) {
  ModelParams<float> params = ModelParams<float>::init(model_config_for(cfg), cfg.seed);
  copy_vae(vae, params);
  set_fusion(params, cfg);
  TrainConfig tc;
  tc.steps = steps;
  tc.lr = cfg.lr;
  tc.seed = cfg.seed;
  tc.mode = mode;
  tc.motion_loss = motion;
  tc.clean_threshold = cfg.clean_threshold;
  tc.checkpoint_every = cfg.checkpoint_every;
  tc.checkpoint_dir = checkpoint_dir;
  auto log = [&](const StepRecord& r) {
    if (verbose && (r.step % 100 == 0 || r.step == steps)) {
      std::fprintf(stderr, "step %5d  loss_total %.4f  loss_diff %.4f  loss_motion %.4f\n", r.step, r.total, r.diff,
                   r.motion);
    }
  };
  TrainReport rep = train(train_clips, params, schedule_for(cfg), tc, log);
  if (report) *report = std::move(rep);
  return params;
}

struct LoadedModel {
  ModelParams<float> params;
  GuidanceMode mode = GuidanceMode::kDual;
};

LoadedModel load_model(const RunConfig& cfg) {
  if (cfg.checkpoint.empty() || !fs::exists(cfg.checkpoint)) {
    throw ConfigError("missing checkpoint " + (cfg.checkpoint.empty() ? std::string("(--checkpoint)") : cfg.checkpoint.string()));
  }
  CheckpointInfo info;
  LoadedModel m{load_checkpoint(cfg.checkpoint, &info)};
  if (info.schedule_hash != schedule_for(cfg).hash()) {
    throw ConfigError("checkpoint was trained under a different noise schedule");
  }
  m.mode = cfg.guidance_set ? cfg.guidance
                            : parse_guidance_mode(info.extra.value("guidance", guidance_mode_name(cfg.guidance)));
  return m;
}

std::vector<VideoSequence> inpaint_all(const std::vector<VideoSequence>& clips, const ModelParams<float>& params,
                                       GuidanceMode mode, const RunConfig& cfg,
                                       std::vector<InpaintResult>* results = nullptr) {
  const NoiseSchedule sched = schedule_for(cfg);
  std::vector<VideoSequence> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    InpaintConfig ic;
    ic.seed = clip_seed(cfg.seed, i);
    ic.mode = mode;
    ic.clean_threshold = cfg.clean_threshold;
    InpaintResult r = inpaint_clip(clips[i], params, sched, ic);
    out.push_back(r.video);
    if (results) results->push_back(std::move(r));
  }
  return out;
}

std::vector<VideoSequence> truths(const std::vector<VideoSequence>& clips) {
  std::vector<VideoSequence> out;
  for (const auto& c : clips) out.push_back(truth_sequence(c));
  return out;
}

std::string fingerprint(const RunConfig& cfg, GuidanceMode mode, bool motion) {
  std::ostringstream os;
  os << "guidance=" << guidance_mode_name(mode) << ";motion=" << (motion ? "on" : "off") << ";lambda=" << cfg.lambda
     << ";alpha1=" << cfg.alpha1 << ";seed=" << cfg.seed << ";schedule=" << schedule_for(cfg).hash();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

void cmd_gen(const RunConfig& cfg) {
  if (cfg.clips == 0) throw ConfigError("--clips must be positive");
  require_empty_or_force(cfg.out, cfg.force);
  std::vector<ManifestRecord> all;
  for (std::size_t i = 0; i < cfg.clips; ++i) {
    SynthConfig sc;
    sc.side = cfg.side;
    sc.frames = cfg.frames;
    sc.seed = clip_seed(cfg.seed, i);
    sc.mask_style = i % 2 == 0 ? MaskStyle::kRectangle : MaskStyle::kEllipse;
    sc.max_coverage = cfg.max_coverage;
    sc.clean_threshold = cfg.clean_threshold;
    char id[32];
    std::snprintf(id, sizeof id, "clip_%04zu", i);
    const std::string rel = std::string("clips/") + id;
    save_clip(generate_clip(sc), cfg.out / rel);
    all.push_back({id, rel, cfg.frames, cfg.side});
  }
  const SplitSizes s = split_sizes(cfg.clips);
  write_manifest(all, cfg.out / "manifest.tsv");
  write_manifest({all.begin(), all.begin() + s.train}, cfg.out / "train.tsv");
  write_manifest({all.begin() + s.train, all.begin() + s.train + s.val}, cfg.out / "val.tsv");
  write_manifest({all.begin() + s.train + s.val, all.end()}, cfg.out / "test.tsv");
  std::printf("generated %zu clips (%zu train / %zu val / %zu test) in %s\n", cfg.clips, s.train, s.val, s.test,
              cfg.out.string().c_str());
}

void cmd_pretrain_vae(const RunConfig& cfg) {
  const LoadedSplit train_split = load_split(cfg.data, "train");
  ModelParams<float> params = ModelParams<float>::init(model_config_for(cfg), cfg.seed);
  VaeTrainConfig vc;
  vc.steps = cfg.vae_steps;
  vc.lr = cfg.vae_lr;
  vc.seed = cfg.seed;
  const VaeTrainReport rep = pretrain_vae(train_split.clips, params, vc);
  fs::create_directories(cfg.out);
  std::ostringstream csv;
  csv.precision(9);
  csv << "step,loss\n";
  for (std::size_t i = 0; i < rep.loss.size(); ++i) csv << i + 1 << ',' << rep.loss[i] << '\n';
  write_text(cfg.out / "vae_loss.csv", csv.str());
  save_checkpoint(cfg.out / "vae.ckpt", params, params.vae_parameters(), schedule_for(cfg).hash(),
                  {{"kind", "vae"}, {"steps", cfg.vae_steps}, {"seed", cfg.seed}});
  std::printf("VAE latent scale %.6g, written to %s\n", rep.latent_scale, (cfg.out / "vae.ckpt").string().c_str());
}

void cmd_train(const RunConfig& cfg) {
  const LoadedSplit train_split = load_split(cfg.data, "train");
  const ModelParams<float> vae = vae_source(cfg, train_split.clips);
  fs::create_directories(cfg.out);
  TrainReport report;
  const fs::path ckpt_dir = cfg.out / "checkpoints";
  ModelParams<float> params =
      train_model(cfg, train_split.clips, vae, cfg.guidance, cfg.motion_loss, cfg.steps, &report, ckpt_dir, true);
  write_loss_csv(report, cfg.out / "loss.csv");
  write_loss_by_timestep(report, cfg.out / "loss_by_timestep.csv");
  save_checkpoint(cfg.out / "model.ckpt", params, schedule_for(cfg).hash(),
                  {{"guidance", guidance_mode_name(cfg.guidance)},
                   {"motion_loss", cfg.motion_loss},
                   {"steps", cfg.steps},
                   {"seed", cfg.seed}});
  std::printf("trained %d steps, written to %s\n", cfg.steps, (cfg.out / "model.ckpt").string().c_str());
}

void cmd_inpaint(const RunConfig& cfg) {
  const LoadedModel model = load_model(cfg);
  const LoadedSplit split = load_split(cfg.data, cfg.split);
  std::vector<InpaintResult> results;
  inpaint_all(split.clips, model.params, model.mode, cfg, &results);
  fs::create_directories(cfg.out / "grids");
  std::vector<ManifestRecord> records;
  for (std::size_t i = 0; i < split.clips.size(); ++i) {
    const VideoSequence& in = split.clips[i];
    const VideoSequence& outv = results[i].video;
    bool any = false;
    std::vector<std::vector<Tensor>> rows;
    for (std::size_t t = 0; t < in.size(); ++t) {
      any = any || in.occluded(t);
      const GuideImages<float> g =
          results[i].restored[t] ? results[i].guides[t] : frame_guides(in, t, cfg.clean_threshold);
      std::vector<Tensor> row{in.frames[t], make_masked_frame(in.frames[t], in.masks[t]).context, g.symmetric, g.past,
                              outv.frames[t]};
      if (in.has_truth()) row.push_back(in.truth[t]);
      rows.push_back(std::move(row));
    }
    if (!any) std::printf("%s: no occlusion, passed through unchanged\n", split.ids[i].c_str());
    write_png(tile_grid(rows), cfg.out / "grids" / (split.ids[i] + ".png"));
    const std::string rel = "clips/" + split.ids[i];
    save_clip(outv, cfg.out / rel);
    records.push_back({split.ids[i], rel, outv.size(), outv.side()});
  }
  write_manifest(records, cfg.out / "manifest.tsv");
  std::printf("inpainted %zu clips into %s\n", records.size(), cfg.out.string().c_str());
}

MetricReport cmd_eval(const RunConfig& cfg) {
  const LoadedModel model = load_model(cfg);
  const LoadedSplit split = load_split(cfg.data, cfg.split);
  std::vector<VideoSequence> inpainted;
  if (!cfg.inpainted.empty()) {
    const LoadedSplit done = load_split(cfg.inpainted, "all");
    if (done.ids != split.ids) throw ContractError("inpainted clips do not match split '" + cfg.split + "'");
    inpainted = done.clips;
  } else {
    inpainted = inpaint_all(split.clips, model.params, model.mode, cfg);
  }
  const MetricReport report =
      evaluate(inpainted, truths(split.clips), model.params, split.ids, fingerprint(cfg, model.mode, cfg.motion_loss));
  fs::create_directories(cfg.out);
  write_report_csv(report, cfg.out / "report.csv");
  const std::string table = format_report_table(report);
  write_text(cfg.out / "report.txt", table);
  std::fputs(table.c_str(), stdout);
  return report;
}

std::vector<AblationRow> ablation_plan() {
  return {
      {"components", "baseline", GuidanceMode::kPast, false, std::nullopt, ""},
      {"components", "baseline + dual", GuidanceMode::kDual, false, std::nullopt, ""},
      {"components", "baseline + motion", GuidanceMode::kPast, true, std::nullopt, ""},
      {"components", "DiffMVR", GuidanceMode::kDual, true, std::nullopt, ""},
      {"guides", "single guide (symmetric)", GuidanceMode::kSymmetric, true, std::nullopt, ""},
      {"guides", "single guide (past frame)", GuidanceMode::kPast, true, std::nullopt, ""},
      {"guides", "single guide (present frame)", GuidanceMode::kPresent, true, std::nullopt, ""},
  };
}

double relative_change(double variant, double reference) {
  if (reference == 0.0) return variant == 0.0 ? 0.0 : std::copysign(INFINITY, variant);
  return (variant - reference) / reference;
}

namespace {

const AblationRow* find_row(const AblationTable& t, const std::string& label) {
  for (const auto& r : t.rows) {
    if (r.label == label) return &r;
  }
  return nullptr;
}

const AblationRow* reference_for(const AblationTable& t, const AblationRow& row) {
  return find_row(t, row.table == "components" ? "baseline" : "DiffMVR");
}

struct Column {
  const char* name;
  double MetricReport::*field;
};

constexpr Column kColumns[] = {{"fid_proxy", &MetricReport::fid_proxy},
                               {"ssim", &MetricReport::ssim},
                               {"ssim_mask", &MetricReport::ssim_masked},
                               {"tc", &MetricReport::tc},
                               {"fvd_proxy", &MetricReport::fvd_proxy}};

std::string delta_text(const AblationRow& row, const AblationRow* ref, double MetricReport::*field) {
  if (!row.report || !ref || !ref->report) return "n/a";
  if (&row == ref) return "ref";
  const double d = relative_change((*row.report).*field, (*ref->report).*field);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * d);
  return buf;
}

}  // namespace

std::string AblationTable::format() const {
  std::ostringstream os;
  char line[256];
  for (const char* table : {"components", "guides"}) {
    os << (std::string(table) == "components" ? "component study (reference: baseline)\n"
                                      : "guidance variants (reference: DiffMVR)\n");
    std::snprintf(line, sizeof line, "%-30s", "configuration");
    os << line;
    for (const auto& c : kColumns) {
      std::snprintf(line, sizeof line, " %18s", c.name);
      os << line;
    }
    os << '\n';
    for (const auto& row : rows) {
      if (row.table != table) continue;
      std::snprintf(line, sizeof line, "%-30s", row.label.c_str());
      os << line;
      if (!row.report) {
        os << " FAILED: " << row.failure << '\n';
        continue;
      }
      const AblationRow* ref = reference_for(*this, row);
      for (const auto& c : kColumns) {
        std::snprintf(line, sizeof line, " %9.4f (%6s)", (*row.report).*c.field,
                      delta_text(row, ref, c.field).c_str());
        os << line;
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

void AblationTable::write_csv(const fs::path& path) const {
  std::ostringstream os;
  os.precision(9);
  os << "table,configuration,guidance,motion_loss,status";
  for (const auto& c : kColumns) os << ',' << c.name << ",delta_" << c.name;
  os << '\n';
  for (const auto& row : rows) {
    os << row.table << ',' << row.label << ',' << guidance_mode_name(row.guidance) << ','
       << (row.motion_loss ? "on" : "off") << ',' << (row.report ? "ok" : "failed");
    const AblationRow* ref = reference_for(*this, row);
    for (const auto& c : kColumns) {
      if (row.report) {
        os << ',' << (*row.report).*c.field << ',' << delta_text(row, ref, c.field);
      } else {
        os << ",,";
      }
    }
    os << '\n';
  }
  write_text(path, os.str());
}

AblationTable cmd_ablate(const RunConfig& cfg) {
  const LoadedSplit train_split = load_split(cfg.data, "train");
  const LoadedSplit test_split = load_split(cfg.data, cfg.split);
  const ModelParams<float> vae = vae_source(cfg, train_split.clips);

  AblationTable table;
  table.rows = ablation_plan();
  std::vector<std::optional<ModelParams<float>>> models(table.rows.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < table.rows.size(); i = next++) {
      AblationRow& row = table.rows[i];
      try {
        models[i] = train_model(cfg, train_split.clips, vae, row.guidance, row.motion_loss, cfg.ablate_steps, nullptr,
                                {}, false);
      } catch (const std::exception& e) {
        row.failure = e.what();
      }
      std::lock_guard lock(log_mutex);
      std::fprintf(stderr, "trained %-30s %s\n", row.label.c_str(), row.failure.empty() ? "ok" : "FAILED");
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, table.rows.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // One feature encoder for every row keeps the Frechet columns comparable.
  const ModelParams<float>* encoder = nullptr;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (models[i] && table.rows[i].label == "DiffMVR") encoder = &*models[i];
  }
  for (std::size_t i = 0; !encoder && i < table.rows.size(); ++i) {
    if (models[i]) encoder = &*models[i];
  }
  const auto truth = truths(test_split.clips);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    AblationRow& row = table.rows[i];
    if (!models[i]) continue;
    try {
      const auto inpainted = inpaint_all(test_split.clips, *models[i], row.guidance, cfg);
      row.report = evaluate(inpainted, truth, *encoder, test_split.ids, fingerprint(cfg, row.guidance, row.motion_loss));
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
  }

  fs::create_directories(cfg.out);
  table.write_csv(cfg.out / "ablation.csv");
  const std::string text = table.format();
  write_text(cfg.out / "ablation.txt", text);
  std::fputs(text.c_str(), stdout);
  return table;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return 4;
  }
  if (dynamic_cast<const Error*>(&e)) return 2;
  return 1;
}

}  // namespace diffmvr
