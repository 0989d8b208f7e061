// depix: face de-pixelization pipeline driver.
//
// Subcommands mirror the pipeline stages: prepare-data, train-stn,
// train-depix, infer, evaluate, ablate, report. Every run directory receives
// the resolved configuration that produced it. Exit codes: 0 success,
// 2 configuration error, 3 data error, 4 numeric failure.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "depix/pipeline.hpp"
#include "depix/resample.hpp"

namespace fs = std::filesystem;
using namespace depix;

namespace {

// One config file may hold a section per stage, and CLI11 loads every section
// into its subcommand's bound variables. Stages therefore never share storage
// unless the value genuinely means the same thing everywhere (seed, window,
// net hyperparameters).
struct CliState {
  RunConfig cfg;
  std::string dataset;  // --manifest; the dataset root means the same in every stage
  std::string source;
  std::string stn_ckpt;
  std::string gen_ckpt;
  std::string clip_id;
  std::string plan_path;
  std::string pred_dir;
  std::string gt_dir;
  std::string pix_dir;
  std::vector<std::string> pred_dirs;
  int report_frames = 0;
  bool force = false;
  bool no_stn = false;
  std::vector<int> sweep_w{0, 2};
  // per-stage output destinations
  std::string prep_out, stn_out, depix_out, infer_out, eval_out, ablate_out, report_out;
  std::string report_gt_dir;
};

std::string join_args(int argc, char** argv) {
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  return cmd;
}

std::vector<ClipManifest> manifests_for_split(const fs::path& root, const std::string& split) {
  auto all = read_manifests(root);
  if (split.empty() || split == "all") return all;
  std::vector<ClipManifest> out;
  for (auto& m : all) {
    if (m.split == split) out.push_back(std::move(m));
  }
  if (out.empty()) throw DataError("no clips in split '" + split + "'");
  return out;
}

void cmd_prepare_data(CliState& st, const std::string& command) {
  const fs::path src(st.source);
  const fs::path root(st.prep_out);
  if (!fs::exists(src)) throw DataError("prepare-data: source does not exist: " + st.source);

  // one clip per subdirectory or video file; a flat PNG directory is one clip
  std::vector<fs::path> clip_sources;
  bool flat = false;
  if (fs::is_directory(src)) {
    for (const auto& e : fs::directory_iterator(src)) {
      if (e.is_directory()) clip_sources.push_back(e.path());
      if (e.is_regular_file() && e.path().extension() != ".png") clip_sources.push_back(e.path());
    }
    if (clip_sources.empty()) {
      clip_sources.push_back(src);
      flat = true;
    }
  } else {
    clip_sources.push_back(src);
  }
  std::sort(clip_sources.begin(), clip_sources.end());

  CropSpec crop;
  crop.crop_resolution = st.cfg.crop_resolution;
  std::vector<ClipManifest> clips;
  for (const auto& cs : clip_sources) {
    const std::string clip_id = flat ? "clip_000" : cs.stem().string();
    const fs::path hr_probe = root / clip_id / "hr";
    ClipManifest m;
    if (!st.force && fs::is_directory(hr_probe)) {
      // keep existing ingested frames; re-derive the manifest entry
      size_t count = 0;
      for (const auto& e : fs::directory_iterator(hr_probe)) {
        count += e.is_regular_file() && e.path().extension() == ".png" ? 1 : 0;
      }
      m.clip_id = clip_id;
      m.frame_count = static_cast<int>(count);
      m.hr_dir = clip_id + "/hr";
      std::cerr << "[prepare-data] reusing ingested clip " << clip_id << " (" << count
                << " frames)\n";
    } else {
      m = ingest(cs, crop, root, clip_id);
      std::cerr << "[prepare-data] ingested " << clip_id << " (" << m.frame_count << " frames)\n";
    }
    generate_pixelated(root, m, st.cfg.lr_size, st.cfg.hr_size);
    clips.push_back(std::move(m));
  }
  if (clips.size() >= 2) {
    split_dataset(clips, st.cfg.test_fraction, st.cfg.seed);
  } else {
    std::cerr << "[prepare-data] single clip: keeping it in the train split\n";
  }
  write_manifests(root, clips);
  fsck_dataset(root, clips);
  write_provenance(root, st.cfg, command);
  std::cerr << "[prepare-data] wrote " << clips.size() << " clip manifest(s) under " << st.prep_out
            << "\n";
}

void cmd_train_stn(CliState& st, const std::string& command) {
  const fs::path root(st.dataset);
  const fs::path out(st.stn_out);
  if (!st.force && fs::exists(out)) {
    std::cerr << "[train-stn] " << st.stn_out << " already exists; pass --force to retrain\n";
    return;
  }
  const auto manifests = manifests_for_split(root, "train");
  std::vector<ClipFrames> clips;
  for (const auto& m : manifests) {
    if (m.lr_size != st.cfg.lr_size) {
      throw ConfigError("train-stn: dataset was pixelated at lr=" + std::to_string(m.lr_size) +
                        " but --lr-size is " + std::to_string(st.cfg.lr_size));
    }
    clips.push_back(load_clip_frames(root, m));
  }
  const fs::path run_dir = out.parent_path().empty() ? "." : out.parent_path();
  write_provenance(run_dir, st.cfg, command);
  std::ofstream jsonl(run_dir / "stn_train_log.jsonl", std::ios::trunc);
  const auto result =
      train_stn(clips, st.cfg.stn_net_config(), st.cfg.stn_train, out, &jsonl, &std::cerr);
  std::cerr << "[train-stn] best val recon " << result.best_val_recon << " vs identity baseline "
            << result.identity_baseline << "\n";
}

void cmd_train_depix(CliState& st, const std::string& command) {
  const fs::path root(st.dataset);
  const fs::path out(st.depix_out);
  if (!st.force && fs::exists(out / "generator.ckpt")) {
    std::cerr << "[train-depix] " << (out / "generator.ckpt").string()
              << " already exists; pass --force to retrain\n";
    return;
  }
  st.cfg.depix_train.use_stn = !st.no_stn;

  std::vector<TrainClip> train_clips, held_out;
  const auto train_manifests = manifests_for_split(root, "train");
  for (const auto& m : train_manifests) {
    if (m.lr_size != train_manifests.front().lr_size ||
        m.hr_size != train_manifests.front().hr_size) {
      throw DataError("train-depix: clips were pixelated at inconsistent resolutions");
    }
    train_clips.push_back(load_train_clip(root, m));
  }
  if (st.cfg.lr_size != train_manifests.front().lr_size) {
    throw ConfigError("train-depix: dataset was pixelated at lr=" +
                      std::to_string(train_manifests.front().lr_size) + " but --lr-size is " +
                      std::to_string(st.cfg.lr_size));
  }
  st.cfg.hr_size = train_manifests.front().hr_size;  // generator works at dataset resolution
  try {
    for (const auto& m : manifests_for_split(root, "test")) {
      held_out.push_back(load_train_clip(root, m));
    }
  } catch (const DataError&) {
    // no held-out split at desk scale; evaluation passes are skipped
  }

  std::unique_ptr<StnNet> aligner;
  if (st.cfg.depix_train.use_stn) {
    if (st.stn_ckpt.empty()) {
      throw ConfigError("train-depix: --stn checkpoint required (or pass --no-stn)");
    }
    aligner = std::make_unique<StnNet>(stn_from_checkpoint(st.stn_ckpt));
    st.cfg.depix_train.aligner_digest = checkpoint_digest(st.stn_ckpt);
  }
  write_provenance(out, st.cfg, command);
  std::ofstream jsonl(out / "train_log.jsonl", std::ios::trunc);
  const auto result =
      train_depix(train_clips, held_out, aligner.get(), st.cfg.depix_net_config(), st.cfg.disc,
                  st.cfg.depix_train, out, &jsonl, &std::cerr);
  std::cerr << "[train-depix] train recon " << result.train_recon << " train psnr "
            << result.train_psnr << " dB\n";
}

void cmd_infer(CliState& st, const std::string& command) {
  const fs::path root(st.dataset);
  DepixNet gen = depix_from_checkpoint(st.gen_ckpt);
  std::unique_ptr<StnNet> aligner;
  if (!st.no_stn) {
    if (st.stn_ckpt.empty() && st.cfg.window.w > 0) {
      throw ConfigError("infer: --stn checkpoint required (or pass --no-stn)");
    }
    if (!st.stn_ckpt.empty()) aligner = std::make_unique<StnNet>(stn_from_checkpoint(st.stn_ckpt));
  }
  auto manifests = manifests_for_split(root, st.clip_id.empty() ? "test" : "all");
  if (!st.clip_id.empty()) {
    std::erase_if(manifests, [&](const ClipManifest& m) { return m.clip_id != st.clip_id; });
    if (manifests.empty()) throw DataError("infer: no clip named '" + st.clip_id + "'");
  }
  write_provenance(st.infer_out, st.cfg, command);
  for (const auto& m : manifests) {
    const fs::path out_dir = fs::path(st.infer_out) / m.clip_id;
    infer_clip(gen, aligner.get(), root, m, st.cfg.window, out_dir, st.force);
    std::cerr << "[infer] " << m.clip_id << ": " << m.frame_count << " frames -> "
              << out_dir.string() << "\n";
  }
}

void cmd_evaluate(CliState& st, const std::string&) {
  FeatureExtractor extractor =
      make_extractor_vggface(st.cfg.depix_train.vggface_asset, &std::cerr);
  const MetricsRecord summary = evaluate_dirs(
      st.pred_dir, st.gt_dir, st.eval_out.empty() ? "metrics.json" : st.eval_out, extractor);
  std::cerr << "[evaluate] frames " << summary.count << " psnr " << summary.psnr << " ssim "
            << summary.ssim << " id " << summary.id_sim << "\n";
}

void cmd_ablate(CliState& st, const std::string& command) {
  const auto all = read_manifests(st.dataset);
  if (st.cfg.lr_size != all.front().lr_size) {
    throw ConfigError("ablate: dataset was pixelated at lr=" +
                      std::to_string(all.front().lr_size) + " but --lr-size is " +
                      std::to_string(st.cfg.lr_size));
  }
  st.cfg.hr_size = all.front().hr_size;
  AblationPlan plan;
  if (!st.plan_path.empty()) {
    std::ifstream in(st.plan_path);
    if (!in) throw ConfigError("ablate: cannot read plan " + st.plan_path);
    plan = AblationPlan::from_json(nlohmann::json::parse(in));
  } else {
    plan = AblationPlan::standard(st.sweep_w);
  }
  write_provenance(st.ablate_out, st.cfg, command);
  const AblationReport report =
      run_ablation(plan, st.cfg, st.dataset, st.ablate_out, &std::cerr);
  for (const auto& row : report.rows) {
    std::cerr << "[ablate] " << row.name << ": "
              << (row.failed ? "FAILED (" + row.error + ")"
                             : "psnr " + std::to_string(row.metrics.psnr) + " ssim " +
                                   std::to_string(row.metrics.ssim) + " id " +
                                   std::to_string(row.metrics.id_sim))
              << "\n";
  }
}

void cmd_report(CliState& st, const std::string&) {
  std::vector<fs::path> preds(st.pred_dirs.begin(), st.pred_dirs.end());
  make_report(preds, st.report_gt_dir, st.pix_dir, st.report_out, st.report_frames);
  std::cerr << "[report] wrote " << st.report_out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face de-pixelization pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file (flags win on conflict)");
  // one config file may carry sections for every stage
  app.allow_config_extras(true);

  CliState st;
  app.add_option("--seed", st.cfg.seed, "Seed for all randomness")->capture_default_str();

  auto* prep = app.add_subcommand("prepare-data", "Ingest clips and build pixelated/gt pairs");
  prep->fallthrough();
  prep->add_option("--source", st.source, "Clip directory (or directory of clips / video files)")
      ->required();
  prep->add_option("--out", st.prep_out, "Dataset root to create")->required();
  prep->add_option("--lr-size", st.cfg.lr_size, "Pixelation resolution (8 or 16)")
      ->capture_default_str();
  prep->add_option("--hr-size", st.cfg.hr_size, "Working resolution")->capture_default_str();
  prep->add_option("--crop-resolution", st.cfg.crop_resolution, "Stored crop resolution")
      ->capture_default_str();
  prep->add_option("--test-fraction", st.cfg.test_fraction, "Clip-level test fraction")
      ->capture_default_str();
  prep->add_flag("--force", st.force, "Re-ingest existing clips");

  auto* tstn = app.add_subcommand("train-stn", "Train the alignment network");
  tstn->fallthrough();
  tstn->add_option("--manifest", st.dataset, "Dataset root (holds manifests.jsonl)")->required();
  tstn->add_option("--lr-size", st.cfg.lr_size, "STN input resolution (8 or 16)")
      ->capture_default_str();
  tstn->add_option("--out", st.stn_out, "Checkpoint path to write")->required();
  tstn->add_option("--steps", st.cfg.stn_train.steps, "Training steps")->capture_default_str();
  tstn->add_option("--batch", st.cfg.stn_train.batch_size, "Batch size")->capture_default_str();
  tstn->add_option("--lr", st.cfg.stn_train.lr, "Learning rate")->capture_default_str();
  tstn->add_option("--lambda-id", st.cfg.stn_train.lambda_id, "Identity regularizer weight")
      ->capture_default_str();
  tstn->add_option("--max-gap", st.cfg.stn_train.max_gap,
                   "Max pair gap in frames (default w*d)");
  tstn->add_option("--base-channels", st.cfg.stn_base_channels, "STN base width")
      ->capture_default_str();
  tstn->add_flag("--force", st.force, "Retrain over an existing checkpoint");

  auto* tdx = app.add_subcommand("train-depix", "Train the de-pixelization network");
  tdx->fallthrough();
  tdx->add_option("--manifest", st.dataset, "Dataset root")->required();
  tdx->add_option("--stn", st.stn_ckpt, "Frozen aligner checkpoint");
  tdx->add_option("--out", st.depix_out, "Run directory")->required();
  tdx->add_option("--w", st.cfg.window.w, "Support half-window")->capture_default_str();
  tdx->add_option("--d", st.cfg.window.d, "Support spacing")->capture_default_str();
  tdx->add_option("--lr-size", st.cfg.lr_size, "Dataset pixelation resolution")
      ->capture_default_str();
  tdx->add_option("--steps", st.cfg.depix_train.steps, "Training steps")->capture_default_str();
  tdx->add_option("--batch", st.cfg.depix_train.batch_size, "Batch size")->capture_default_str();
  tdx->add_option("--lr", st.cfg.depix_train.lr, "Learning rate")->capture_default_str();
  tdx->add_option("--lambda-p", st.cfg.depix_train.lambda_p, "Perceptual weight")
      ->capture_default_str();
  tdx->add_option("--lambda-adv", st.cfg.depix_train.lambda_adv, "Adversarial weight")
      ->capture_default_str();
  tdx->add_option("--base-channels", st.cfg.depix_base_channels, "U-Net base width")
      ->capture_default_str();
  tdx->add_option("--depth", st.cfg.depix_depth, "U-Net encoder levels")->capture_default_str();
  tdx->add_option("--vgg19", st.cfg.depix_train.vgg19_asset, "Pretrained VGG-19 asset");
  tdx->add_option("--vggface", st.cfg.depix_train.vggface_asset, "Pretrained VGG-Face asset");
  tdx->add_option("--stack-cache", st.cfg.depix_train.stack_cache_dir, "On-disk stack cache dir");
  tdx->add_flag("--no-stn", st.no_stn, "Build stacks with identity grids (ablation arm)");
  tdx->add_flag("--force", st.force, "Retrain over an existing run directory");

  auto* inf = app.add_subcommand("infer", "De-pixelize clips with trained checkpoints");
  inf->fallthrough();
  inf->add_option("--gen", st.gen_ckpt, "Generator checkpoint")->required();
  inf->add_option("--stn", st.stn_ckpt, "Aligner checkpoint");
  inf->add_option("--manifest", st.dataset, "Dataset root")->required();
  inf->add_option("--clip", st.clip_id, "Single clip id (default: every test clip)");
  inf->add_option("--w", st.cfg.window.w, "Support half-window")->capture_default_str();
  inf->add_option("--d", st.cfg.window.d, "Support spacing")->capture_default_str();
  inf->add_option("--out", st.infer_out, "Output directory")->required();
  inf->add_flag("--no-stn", st.no_stn, "Identity-grid stacks");
  inf->add_flag("--force", st.force, "Overwrite existing output frames");

  auto* eval = app.add_subcommand("evaluate", "PSNR/SSIM/identity over aligned directories");
  eval->fallthrough();
  eval->add_option("--pred-dir", st.pred_dir, "Predicted frames")->required();
  eval->add_option("--gt-dir", st.gt_dir, "Ground-truth frames")->required();
  eval->add_option("--out", st.eval_out, "Metrics JSON-lines file")->required();
  eval->add_option("--vggface", st.cfg.depix_train.vggface_asset, "Pretrained VGG-Face asset");

  auto* abl = app.add_subcommand("ablate", "Run the ablation table and stack-size sweep");
  abl->fallthrough();
  abl->add_option("--manifest", st.dataset, "Dataset root")->required();
  abl->add_option("--out", st.ablate_out, "Ablation output directory")->required();
  abl->add_option("--plan", st.plan_path, "JSON plan (default: full, w/o STN, w/o disc., F sweep)");
  abl->add_option("--sweep-w", st.sweep_w, "Half-window values for the F sweep")
      ->capture_default_str();
  abl->add_option("--lr-size", st.cfg.lr_size, "Dataset pixelation resolution")
      ->capture_default_str();
  abl->add_option("--w", st.cfg.window.w, "Base support half-window")->capture_default_str();
  abl->add_option("--d", st.cfg.window.d, "Base support spacing")->capture_default_str();
  abl->add_option("--stn-steps", st.cfg.stn_train.steps, "Aligner training steps")
      ->capture_default_str();
  abl->add_option("--steps", st.cfg.depix_train.steps, "Per-variant training steps")
      ->capture_default_str();
  abl->add_option("--batch", st.cfg.depix_train.batch_size, "Batch size")->capture_default_str();
  abl->add_option("--base-channels", st.cfg.depix_base_channels, "U-Net base width")
      ->capture_default_str();
  abl->add_option("--depth", st.cfg.depix_depth, "U-Net encoder levels")->capture_default_str();

  auto* rep = app.add_subcommand("report", "Contact-sheet grids (input | GT | outputs)");
  rep->fallthrough();
  rep->add_option("--pred-dir", st.pred_dirs, "Prediction directories, row order as given")
      ->required();
  rep->add_option("--gt-dir", st.report_gt_dir, "Ground-truth frames")->required();
  rep->add_option("--pix-dir", st.pix_dir, "Pixelated input frames")->required();
  rep->add_option("--out", st.report_out, "Output grid PNG")->required();
  rep->add_option("--frames", st.report_frames, "Max frame columns (0 = all)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    st.cfg.resolve();
    const std::string command = join_args(argc, argv);
    if (prep->parsed()) cmd_prepare_data(st, command);
    if (tstn->parsed()) cmd_train_stn(st, command);
    if (tdx->parsed()) cmd_train_depix(st, command);
    if (inf->parsed()) cmd_infer(st, command);
    if (eval->parsed()) cmd_evaluate(st, command);
    if (abl->parsed()) cmd_ablate(st, command);
    if (rep->parsed()) cmd_report(st, command);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
