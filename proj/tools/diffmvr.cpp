#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "diffmvr/cli/commands.hpp"

using diffmvr::RunConfig;

namespace {

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--config", "Flat key = value file; flags override it");
  sub->add_option("--out", cfg.out, "Output directory");
  sub->add_option("--seed", cfg.seed, "Master seed");
  sub->add_option("--side", cfg.side, "Frame side p");
  sub->add_option("--t-max", cfg.t_max, "Diffusion steps");
  sub->add_option("--beta-start", cfg.beta_start);
  sub->add_option("--beta-end", cfg.beta_end);
  sub->add_option("--clean-threshold", cfg.clean_threshold, "Coverage below which a frame counts as unobstructed");
}

void add_data(CLI::App* sub, RunConfig& cfg) { sub->add_option("--data", cfg.data, "Dataset directory from gen"); }

void add_training(CLI::App* sub, RunConfig& cfg, std::string& guidance, std::string& motion) {
  sub->add_option("--vae", cfg.vae, "VAE checkpoint from pretrain-vae");
  sub->add_option("--steps", cfg.steps, "Diffusion training steps");
  sub->add_option("--lr", cfg.lr);
  sub->add_option("--vae-steps", cfg.vae_steps);
  sub->add_option("--vae-lr", cfg.vae_lr);
  sub->add_option("--guidance", guidance, "dual|sym|past|present")->check(CLI::IsMember({"dual", "sym", "past", "present"}));
  sub->add_option("--motion-loss", motion, "on|off")->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--lambda", cfg.lambda, "Motion-loss weight");
  sub->add_option("--alpha1", cfg.alpha1, "Weight of the symmetric guide; alpha2 = 1 - alpha1");
}

// Keys are long option names without dashes; options given on the command
// line keep their value.
void apply_config_file(CLI::App* sub) {
  const std::string path = sub->get_option("--config")->as<std::string>();
  if (path.empty()) return;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::FileError&) {
    throw diffmvr::IoError("cannot read config file " + path);
  }
  for (const auto& item : items) {
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw diffmvr::ConfigError("unknown key '" + item.name + "' in " + path + " for " + sub->get_name());
    if (opt->count() > 0) continue;
    for (const auto& value : item.inputs) opt->add_result(value);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-guided latent-diffusion video inpainting on synthetic occluded clips"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string guidance = "dual";
  std::string motion = "on";

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_common(gen, cfg);
  gen->add_option("--clips", cfg.clips, "Number of clips");
  gen->add_option("--frames", cfg.frames, "Frames per clip");
  gen->add_option("--max-coverage", cfg.max_coverage);
  gen->add_flag("--force", cfg.force, "Write into a non-empty directory");

  auto* vae = app.add_subcommand("pretrain-vae", "Pretrain the VAE on training truth frames");
  add_common(vae, cfg);
  add_data(vae, cfg);
  vae->add_option("--vae-steps", cfg.vae_steps);
  vae->add_option("--vae-lr", cfg.vae_lr);

  auto* train = app.add_subcommand("train", "Train the denoiser, encoders and projectors");
  add_common(train, cfg);
  add_data(train, cfg);
  add_training(train, cfg, guidance, motion);
  train->add_option("--checkpoint-every", cfg.checkpoint_every);

  auto* inpaint = app.add_subcommand("inpaint", "Inpaint a split and write grids");
  add_common(inpaint, cfg);
  add_data(inpaint, cfg);
  inpaint->add_option("--checkpoint", cfg.checkpoint)->required();
  inpaint->add_option("--split", cfg.split, "train|val|test|all");
  inpaint->add_option("--guidance", guidance)->check(CLI::IsMember({"dual", "sym", "past", "present"}));

  auto* eval = app.add_subcommand("eval", "Score inpainted clips against truth");
  add_common(eval, cfg);
  add_data(eval, cfg);
  eval->add_option("--checkpoint", cfg.checkpoint)->required();
  eval->add_option("--split", cfg.split);
  eval->add_option("--inpainted", cfg.inpainted, "Directory written by inpaint; inpaints in-process when absent");
  eval->add_option("--guidance", guidance)->check(CLI::IsMember({"dual", "sym", "past", "present"}));

  auto* ablate = app.add_subcommand("ablate", "Train and score the seven ablation configurations");
  add_common(ablate, cfg);
  add_data(ablate, cfg);
  add_training(ablate, cfg, guidance, motion);
  ablate->add_option("--ablate-steps", cfg.ablate_steps, "Training steps per configuration");
  ablate->add_option("--split", cfg.split);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (const char* threads = std::getenv("DIFFMVR_THREADS")) {
    try {
      cfg.workers = std::max(1, std::stoi(threads));
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: DIFFMVR_THREADS must be a positive integer\n");
      return 2;
    }
  }

  try {
    for (auto* sub : app.get_subcommands()) apply_config_file(sub);
    cfg.guidance = diffmvr::parse_guidance_mode(guidance);
    for (auto* sub : {train, inpaint, eval, ablate}) {
      if (sub->get_option_no_throw("--guidance") && sub->count("--guidance") > 0) cfg.guidance_set = true;
    }
    if (motion != "on" && motion != "off") throw diffmvr::ConfigError("motion-loss must be on or off");
    cfg.motion_loss = motion == "on";
    if (*gen) diffmvr::cmd_gen(cfg);
    if (*vae) diffmvr::cmd_pretrain_vae(cfg);
    if (*train) diffmvr::cmd_train(cfg);
    if (*inpaint) diffmvr::cmd_inpaint(cfg);
    if (*eval) diffmvr::cmd_eval(cfg);
    if (*ablate) diffmvr::cmd_ablate(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return diffmvr::exit_code_for(e);
  }
  return 0;
}
