#include "depix/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

namespace depix {

namespace fs = std::filesystem;

StnNetConfig RunConfig::stn_net_config() const {
  StnNetConfig c;
  c.input_resolution = lr_size;
  c.base_channels = stn_base_channels;
  return c;
}

DepixNetConfig RunConfig::depix_net_config() const {
  DepixNetConfig c;
  c.input_resolution = hr_size;
  c.input_channels = window.stack_channels();
  c.depth = depix_depth;
  c.base_channels = depix_base_channels;
  return c;
}

void RunConfig::resolve() {
  window.validate();
  if (stn_train.max_gap <= 0) stn_train.max_gap = std::max(1, window.w * window.d);
  depix_train.window = window;
  stn_train.seed = seed;
  depix_train.seed = seed;
}

void to_json(nlohmann::ordered_json& j, const RunConfig& cfg) {
  j = nlohmann::ordered_json{
      {"schema_version", cfg.schema_version},
      {"seed", cfg.seed},
      {"data",
       {{"crop_resolution", cfg.crop_resolution},
        {"lr_size", cfg.lr_size},
        {"hr_size", cfg.hr_size},
        {"test_fraction", cfg.test_fraction}}},
      {"window", {{"w", cfg.window.w}, {"d", cfg.window.d}}},
      {"stn",
       {{"base_channels", cfg.stn_base_channels},
        {"steps", cfg.stn_train.steps},
        {"batch_size", cfg.stn_train.batch_size},
        {"lr", cfg.stn_train.lr},
        {"lambda_recon", cfg.stn_train.lambda_recon},
        {"lambda_id", cfg.stn_train.lambda_id},
        {"max_gap", cfg.stn_train.max_gap},
        {"eval_every", cfg.stn_train.eval_every},
        {"val_pairs", cfg.stn_train.val_pairs},
        {"patience", cfg.stn_train.patience}}},
      {"depix",
       {{"base_channels", cfg.depix_base_channels},
        {"depth", cfg.depix_depth},
        {"steps", cfg.depix_train.steps},
        {"batch_size", cfg.depix_train.batch_size},
        {"lr", cfg.depix_train.lr},
        {"lambda_r", cfg.depix_train.lambda_r},
        {"lambda_p", cfg.depix_train.lambda_p},
        {"lambda_adv", cfg.depix_train.lambda_adv},
        {"use_stn", cfg.depix_train.use_stn},
        {"eval_frames", cfg.depix_train.eval_frames},
        {"vgg19_asset", cfg.depix_train.vgg19_asset.string()},
        {"vggface_asset", cfg.depix_train.vggface_asset.string()},
        {"stack_cache_dir", cfg.depix_train.stack_cache_dir.string()}}},
      {"disc",
       {{"num_layers", cfg.disc.num_layers}, {"base_channels", cfg.disc.base_channels}}}};
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
  cfg.schema_version = j.at("schema_version").get<int>();
  if (cfg.schema_version != 1) {
    throw ConfigError("RunConfig: unsupported schema_version " +
                      std::to_string(cfg.schema_version));
  }
  cfg.seed = j.at("seed").get<uint64_t>();
  const auto& d = j.at("data");
  cfg.crop_resolution = d.at("crop_resolution").get<int>();
  cfg.lr_size = d.at("lr_size").get<int>();
  cfg.hr_size = d.at("hr_size").get<int>();
  cfg.test_fraction = d.at("test_fraction").get<double>();
  const auto& w = j.at("window");
  cfg.window.w = w.at("w").get<int>();
  cfg.window.d = w.at("d").get<int>();
  const auto& s = j.at("stn");
  cfg.stn_base_channels = s.at("base_channels").get<int>();
  cfg.stn_train.steps = s.at("steps").get<int>();
  cfg.stn_train.batch_size = s.at("batch_size").get<int>();
  cfg.stn_train.lr = s.at("lr").get<double>();
  cfg.stn_train.lambda_recon = s.at("lambda_recon").get<double>();
  cfg.stn_train.lambda_id = s.at("lambda_id").get<double>();
  cfg.stn_train.max_gap = s.at("max_gap").get<int>();
  cfg.stn_train.eval_every = s.at("eval_every").get<int>();
  cfg.stn_train.val_pairs = s.at("val_pairs").get<int>();
  cfg.stn_train.patience = s.at("patience").get<int>();
  const auto& p = j.at("depix");
  cfg.depix_base_channels = p.at("base_channels").get<int>();
  cfg.depix_depth = p.at("depth").get<int>();
  cfg.depix_train.steps = p.at("steps").get<int>();
  cfg.depix_train.batch_size = p.at("batch_size").get<int>();
  cfg.depix_train.lr = p.at("lr").get<double>();
  cfg.depix_train.lambda_r = p.at("lambda_r").get<double>();
  cfg.depix_train.lambda_p = p.at("lambda_p").get<double>();
  cfg.depix_train.lambda_adv = p.at("lambda_adv").get<double>();
  cfg.depix_train.use_stn = p.at("use_stn").get<bool>();
  cfg.depix_train.eval_frames = p.at("eval_frames").get<int>();
  cfg.depix_train.vgg19_asset = p.at("vgg19_asset").get<std::string>();
  cfg.depix_train.vggface_asset = p.at("vggface_asset").get<std::string>();
  cfg.depix_train.stack_cache_dir = p.at("stack_cache_dir").get<std::string>();
  const auto& dc = j.at("disc");
  cfg.disc.num_layers = dc.at("num_layers").get<int>();
  cfg.disc.base_channels = dc.at("base_channels").get<int>();
  cfg.resolve();
}

RunConfig apply_overrides(const RunConfig& base, const nlohmann::json& overrides) {
  nlohmann::ordered_json j;
  to_json(j, base);
  for (const auto& [key, value] : overrides.items()) {
    // dotted path into the nested config; the leaf must already exist
    nlohmann::ordered_json* node = &j;
    size_t pos = 0;
    std::string rest = key;
    while ((pos = rest.find('.')) != std::string::npos) {
      const std::string head = rest.substr(0, pos);
      if (!node->contains(head)) {
        throw ConfigError("override touches undeclared key '" + key + "'");
      }
      node = &(*node)[head];
      rest = rest.substr(pos + 1);
    }
    if (!node->contains(rest)) {
      throw ConfigError("override touches undeclared key '" + key + "'");
    }
    (*node)[rest] = value;
  }
  RunConfig out;
  from_json(j, out);
  return out;
}

void write_provenance(const fs::path& run_dir, const RunConfig& cfg, const std::string& command) {
  fs::create_directories(run_dir);
  nlohmann::ordered_json j;
  to_json(j, cfg);
  nlohmann::ordered_json wrapped{{"command", command}, {"config", j}};
  std::ofstream out(run_dir / "resolved_config.json", std::ios::trunc);
  out << wrapped.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

void infer_clip(DepixNet& generator, StnNet* aligner, const fs::path& root,
                const ClipManifest& manifest, const SupportWindowSpec& window,
                const fs::path& out_dir, bool force) {
  window.validate();
  if (generator.config().input_channels != window.stack_channels()) {
    throw ConfigError("infer_clip: generator expects " +
                      std::to_string(generator.config().input_channels) +
                      " channels but window w=" + std::to_string(window.w) + " builds " +
                      std::to_string(window.stack_channels()));
  }
  const ClipFrames clip = load_clip_frames(root, manifest);
  fs::create_directories(out_dir);
  for (int c = 0; c < clip.size(); ++c) {
    const fs::path out_path = frame_path(out_dir, "", c);
    if (!force && fs::exists(out_path)) continue;
    const FrameStack stack = build_stack(clip, c, window, aligner);
    Frame pred = generator.infer(stack.channels);
    pred.clip_id = manifest.clip_id;
    pred.frame_index = c;
    save_png(pred, out_path);
  }
}

namespace {

std::vector<std::string> png_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError("evaluate: not a directory: " + dir.string());
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      names.push_back(e.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

MetricsRecord evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir,
                            const fs::path& out_json, FeatureExtractor& extractor) {
  const auto pred_names = png_names(pred_dir);
  const auto gt_names = png_names(gt_dir);
  if (pred_names.empty()) throw DataError("evaluate: no frames in " + pred_dir.string());
  if (pred_names != gt_names) {
    throw DataError("evaluate: " + pred_dir.string() + " and " + gt_dir.string() +
                    " are not index-aligned");
  }
  if (out_json.has_parent_path()) fs::create_directories(out_json.parent_path());
  std::ofstream out(out_json, std::ios::trunc);
  if (!out) throw DataError("evaluate: cannot write " + out_json.string());

  std::vector<MetricsRecord> frames;
  for (const auto& name : pred_names) {
    const Frame pred = load_png(pred_dir / name);
    const Frame gt = load_png(gt_dir / name);
    const MetricsRecord r = frame_metrics(pred, gt, extractor);
    frames.push_back(r);
    nlohmann::ordered_json j{{"type", "frame"},
                             {"name", name},
                             {"psnr", r.psnr},
                             {"ssim", r.ssim},
                             {"id_sim", r.id_sim}};
    out << j.dump() << "\n";
  }
  const MetricsRecord summary = aggregate(frames, MetricScope::kDataset);
  nlohmann::ordered_json j{{"type", "summary"},
                           {"count", summary.count},
                           {"psnr", summary.psnr},
                           {"ssim", summary.ssim},
                           {"id_sim", summary.id_sim}};
  out << j.dump() << "\n";
  return summary;
}

// ---------------------------------------------------------------------------

AblationPlan AblationPlan::standard(const std::vector<int>& sweep_w) {
  AblationPlan plan;
  plan.variants.push_back({"full", nlohmann::json::object()});
  plan.variants.push_back({"w/o STN", {{"depix.use_stn", false}}});
  plan.variants.push_back({"w/o disc.", {{"depix.lambda_adv", 0.0}}});
  for (int w : sweep_w) {
    plan.variants.push_back(
        {"F=" + std::to_string(2 * w + 1), nlohmann::json{{"window.w", w}}});
  }
  plan.validate();
  return plan;
}

AblationPlan AblationPlan::from_json(const nlohmann::json& j) {
  AblationPlan plan;
  for (const auto& v : j.at("variants")) {
    plan.variants.push_back(
        {v.at("name").get<std::string>(), v.value("overrides", nlohmann::json::object())});
  }
  plan.validate();
  return plan;
}

void AblationPlan::validate() const {
  std::vector<std::string> names;
  for (const auto& v : variants) names.push_back(v.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw ConfigError("AblationPlan: variant names must be unique");
  }
}

namespace {

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '_';
  }
  return out;
}

}  // namespace

AblationReport run_ablation(const AblationPlan& plan, const RunConfig& base,
                            const fs::path& dataset_root, const fs::path& out_dir,
                            std::ostream* human) {
  plan.validate();
  AblationReport report;
  fs::create_directories(out_dir);
  if (plan.variants.empty()) {
    std::ofstream(out_dir / "ablation.json") << nlohmann::json{{"rows", nlohmann::json::array()},
                                                               {"sweep", nlohmann::json::array()}}
                                                    .dump(2)
                                             << "\n";
    std::ofstream(out_dir / "ablation.csv") << "name,psnr,ssim,id,status\n";
    return report;
  }

  const auto manifests = read_manifests(dataset_root);
  std::vector<ClipManifest> train_manifests, eval_manifests;
  for (const auto& m : manifests) {
    (m.split == "test" ? eval_manifests : train_manifests).push_back(m);
  }
  if (train_manifests.empty()) train_manifests = manifests;
  if (eval_manifests.empty()) eval_manifests = train_manifests;  // overfit-style evaluation

  // The aligner is shared: it is trained before, and independently of, the
  // de-pixelization variants.
  RunConfig base_resolved = base;
  base_resolved.resolve();
  const fs::path stn_ckpt = out_dir / "stn.ckpt";
  {
    std::vector<ClipFrames> clips;
    for (const auto& m : train_manifests) clips.push_back(load_clip_frames(dataset_root, m));
    std::ofstream jsonl(out_dir / "stn_train_log.jsonl", std::ios::trunc);
    train_stn(clips, base_resolved.stn_net_config(), base_resolved.stn_train, stn_ckpt, &jsonl,
              human);
  }

  std::vector<TrainClip> train_clips, eval_clips;
  for (const auto& m : train_manifests) train_clips.push_back(load_train_clip(dataset_root, m));
  for (const auto& m : eval_manifests) eval_clips.push_back(load_train_clip(dataset_root, m));

  FeatureExtractor id_extractor =
      make_extractor_vggface(base.depix_train.vggface_asset, human);

  for (const auto& variant : plan.variants) {
    AblationRow row;
    row.name = variant.name;
    const fs::path vdir = out_dir / ("variant_" + sanitize(variant.name));
    try {
      RunConfig cfg = apply_overrides(base_resolved, variant.overrides);
      cfg.resolve();
      row.stack_frames = cfg.window.stack_frames();
      write_provenance(vdir, cfg, "ablate:" + variant.name);

      StnNet aligner = stn_from_checkpoint(stn_ckpt);
      cfg.depix_train.aligner_digest = checkpoint_digest(stn_ckpt);
      std::ofstream jsonl(vdir / "train_log.jsonl", std::ios::trunc);
      train_depix(train_clips, eval_clips, &aligner, cfg.depix_net_config(), cfg.disc,
                  cfg.depix_train, vdir, &jsonl, human);

      DepixNet gen = depix_from_checkpoint(vdir / "generator.ckpt");
      std::vector<MetricsRecord> clip_records;
      for (const auto& m : eval_manifests) {
        const fs::path pred_dir = vdir / "pred" / m.clip_id;
        StnNet* stack_aligner = cfg.depix_train.use_stn ? &aligner : nullptr;
        infer_clip(gen, stack_aligner, dataset_root, m, cfg.window, pred_dir, /*force=*/true);
        clip_records.push_back(evaluate_dirs(pred_dir, dataset_root / m.gt_dir,
                                             vdir / ("metrics_" + m.clip_id + ".json"),
                                             id_extractor));
      }
      row.metrics = aggregate(clip_records, MetricScope::kDataset);
      if (!std::isfinite(row.metrics.psnr) || !std::isfinite(row.metrics.ssim) ||
          !std::isfinite(row.metrics.id_sim)) {
        throw NumericError("ablation variant produced non-finite metrics");
      }
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
      if (human) *human << "[ablate] variant '" << variant.name << "' failed: " << e.what() << "\n";
    }
    report.rows.push_back(std::move(row));
  }

  for (const auto& row : report.rows) {
    if (!row.failed && row.stack_frames && row.name.rfind("F=", 0) == 0) {
      report.sweep.emplace_back(*row.stack_frames, row.metrics.id_sim);
    }
  }
  std::sort(report.sweep.begin(), report.sweep.end());

  nlohmann::ordered_json jrows = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    jrows.push_back({{"name", row.name},
                     {"psnr", row.metrics.psnr},
                     {"ssim", row.metrics.ssim},
                     {"id", row.metrics.id_sim},
                     {"status", row.failed ? "failed" : "ok"},
                     {"error", row.error}});
  }
  nlohmann::ordered_json jsweep = nlohmann::ordered_json::array();
  for (const auto& [f, id] : report.sweep) jsweep.push_back({{"F", f}, {"id_sim", id}});
  std::ofstream(out_dir / "ablation.json")
      << nlohmann::ordered_json{{"rows", jrows}, {"sweep", jsweep}}.dump(2) << "\n";

  std::ofstream csv(out_dir / "ablation.csv", std::ios::trunc);
  csv << "name,psnr,ssim,id,status\n";
  for (const auto& row : report.rows) {
    csv << '"' << row.name << "\"," << row.metrics.psnr << ',' << row.metrics.ssim << ','
        << row.metrics.id_sim << ',' << (row.failed ? "failed" : "ok") << "\n";
  }
  return report;
}

// ---------------------------------------------------------------------------

void make_report(const std::vector<fs::path>& pred_dirs, const fs::path& gt_dir,
                 const fs::path& pix_dir, const fs::path& out_png, int max_frames) {
  std::vector<fs::path> sources{pix_dir, gt_dir};
  sources.insert(sources.end(), pred_dirs.begin(), pred_dirs.end());

  const auto names = png_names(sources.front());
  if (names.empty()) throw DataError("report: no frames in " + sources.front().string());
  for (const auto& dir : sources) {
    if (png_names(dir) != names) {
      throw DataError("report: " + dir.string() + " is not index-aligned with " +
                      sources.front().string());
    }
  }
  const int cols = max_frames > 0 ? std::min<int>(max_frames, static_cast<int>(names.size()))
                                  : static_cast<int>(names.size());
  const int rows = static_cast<int>(sources.size());

  const Frame probe = load_png(sources.front() / names.front());
  const int cell_h = probe.height, cell_w = probe.width;
  Frame grid(rows * cell_h, cols * cell_w);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Frame f = load_png(sources[static_cast<size_t>(r)] / names[static_cast<size_t>(c)]);
      if (f.height != cell_h || f.width != cell_w) {
        throw DataError("report: frame size mismatch in " + sources[static_cast<size_t>(r)].string());
      }
      for (int y = 0; y < cell_h; ++y) {
        for (int x = 0; x < cell_w; ++x) {
          for (int ch = 0; ch < 3; ++ch) {
            grid.at(r * cell_h + y, c * cell_w + x, ch) = f.at(y, x, ch);
          }
        }
      }
    }
  }
  save_png(grid, out_png);
}

}  // namespace depix
