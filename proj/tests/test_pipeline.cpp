#include <fstream>

#include "depix/pipeline.hpp"
#include "depix/resample.hpp"
#include "depix/synthetic.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace depix;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// a ready-to-train dataset of small synthetic clips
void make_dataset(const fs::path& root, int clips, int frames, int res, int lr) {
  std::vector<ClipManifest> manifests;
  for (int k = 0; k < clips; ++k) {
    SyntheticClipSpec spec;
    spec.frames = frames;
    spec.resolution = res;
    spec.seed = 100 + static_cast<uint64_t>(k);
    const fs::path src = root.parent_path() / ("src_" + std::to_string(k));
    write_synthetic_clip(spec, src);
    CropSpec crop;
    crop.crop_resolution = res;
    char name[16];
    std::snprintf(name, sizeof(name), "clip_%03d", k);
    ClipManifest m = ingest(src, crop, root, name);
    generate_pixelated(root, m, lr, res);
    manifests.push_back(std::move(m));
  }
  write_manifests(root, manifests);
}

}  // namespace

TEST_CASE("run config round-trips through json") {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.lr_size = 8;
  cfg.window = {4, 3};
  cfg.depix_train.lambda_adv = 0.25;
  cfg.resolve();
  nlohmann::ordered_json j;
  to_json(j, cfg);
  RunConfig back;
  from_json(j, back);
  CHECK(back.seed == 99);
  CHECK(back.lr_size == 8);
  CHECK(back.window.w == 4);
  CHECK(back.window.d == 3);
  CHECK(back.depix_train.lambda_adv == 0.25);
  CHECK(back.stn_train.max_gap == 12);  // resolved to w*d
}

TEST_CASE("overrides apply to declared keys and reject unknown ones") {
  RunConfig base;
  base.resolve();
  const RunConfig out = apply_overrides(base, {{"depix.lambda_adv", 0.0}, {"window.w", 0}});
  CHECK(out.depix_train.lambda_adv == 0.0);
  CHECK(out.window.w == 0);
  CHECK_THROWS_AS(apply_overrides(base, {{"depix.nonsense", 1}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(base, {{"nonsense.depth", 1}}), ConfigError);
}

TEST_CASE("provenance lands in the run directory") {
  testutil::TempDir tmp("provenance");
  RunConfig cfg;
  cfg.resolve();
  write_provenance(tmp.path() / "run", cfg, "unit-test");
  const auto j = nlohmann::json::parse(std::ifstream(tmp.path() / "run" / "resolved_config.json"));
  CHECK(j.at("command") == "unit-test");
  CHECK(j.at("config").at("seed").get<uint64_t>() == cfg.seed);
}

TEST_CASE("ablation plans validate variant names") {
  AblationPlan plan = AblationPlan::standard({0, 2});
  REQUIRE(plan.variants.size() == 5);
  CHECK(plan.variants[0].name == "full");
  CHECK(plan.variants[3].name == "F=1");
  plan.variants.push_back({"full", {}});
  CHECK_THROWS_AS(plan.validate(), ConfigError);

  const auto parsed = AblationPlan::from_json(nlohmann::json::parse(
      R"({"variants":[{"name":"a","overrides":{"depix.lambda_adv":0}},{"name":"b"}]})"));
  CHECK(parsed.variants.size() == 2);
  CHECK(parsed.variants[1].overrides.empty());
}

TEST_CASE("an empty ablation plan emits an empty table and succeeds") {
  testutil::TempDir tmp("ablate_empty");
  RunConfig cfg;
  cfg.resolve();
  const AblationReport report =
      run_ablation(AblationPlan{}, cfg, tmp.path() / "nonexistent-dataset", tmp.path() / "out",
                   nullptr);
  CHECK(report.rows.empty());
  CHECK(report.sweep.empty());
  const auto j = nlohmann::json::parse(std::ifstream(tmp.path() / "out" / "ablation.json"));
  CHECK(j.at("rows").empty());
}

TEST_CASE("infer_clip produces one frame per input frame, deterministically") {
  testutil::TempDir tmp("infer");
  const fs::path root = tmp.path() / "ds";
  make_dataset(root, 1, 8, 64, 16);
  const auto manifests = read_manifests(root);

  DepixNetConfig gen_cfg;
  gen_cfg.input_resolution = 64;
  gen_cfg.input_channels = 9;
  gen_cfg.depth = 3;
  gen_cfg.base_channels = 8;
  DepixNet gen(gen_cfg, 7);
  const SupportWindowSpec window{1, 3};

  infer_clip(gen, nullptr, root, manifests[0], window, tmp.path() / "out1", false);
  for (int i = 0; i < 8; ++i) {
    CHECK(fs::exists(frame_path(tmp.path() / "out1", "", i)));
  }
  infer_clip(gen, nullptr, root, manifests[0], window, tmp.path() / "out2", false);
  for (int i = 0; i < 8; ++i) {
    CHECK(file_bytes(frame_path(tmp.path() / "out1", "", i)) ==
          file_bytes(frame_path(tmp.path() / "out2", "", i)));
  }

  // edge frames use clamped windows and still come out
  const Frame first = load_png(frame_path(tmp.path() / "out1", "", 0));
  CHECK(first.height == 64);

  // window/generator mismatch is a config error
  CHECK_THROWS_AS(
      infer_clip(gen, nullptr, root, manifests[0], {2, 3}, tmp.path() / "bad", false),
      ConfigError);
}

TEST_CASE("infer_clip keeps existing frames unless forced") {
  testutil::TempDir tmp("infer_idem");
  const fs::path root = tmp.path() / "ds";
  make_dataset(root, 1, 4, 64, 16);
  const auto manifests = read_manifests(root);

  DepixNetConfig gen_cfg;
  gen_cfg.input_resolution = 64;
  gen_cfg.input_channels = 3;
  gen_cfg.depth = 3;
  gen_cfg.base_channels = 8;
  DepixNet gen(gen_cfg, 7);

  const fs::path out = tmp.path() / "out";
  infer_clip(gen, nullptr, root, manifests[0], {0, 1}, out, false);
  // plant a sentinel; a non-forced rerun must keep it
  save_png(constant_frame(64, 64, 0.123f), frame_path(out, "", 2));
  const auto sentinel = file_bytes(frame_path(out, "", 2));
  infer_clip(gen, nullptr, root, manifests[0], {0, 1}, out, false);
  CHECK(file_bytes(frame_path(out, "", 2)) == sentinel);
  infer_clip(gen, nullptr, root, manifests[0], {0, 1}, out, true);
  CHECK(file_bytes(frame_path(out, "", 2)) != sentinel);
}

TEST_CASE("evaluate_dirs writes per-frame lines plus a summary") {
  testutil::TempDir tmp("evaluate");
  std::mt19937_64 rng(3);
  fs::create_directories(tmp.path() / "pred");
  fs::create_directories(tmp.path() / "gt");
  for (int i = 0; i < 3; ++i) {
    const Frame gt = testutil::random_frame(32, 32, rng);
    Frame pred = gt;
    for (auto& v : pred.rgb) v = std::clamp(v + 0.05f, 0.f, 1.f);
    save_png(gt, frame_path(tmp.path() / "gt", "", i));
    save_png(pred, frame_path(tmp.path() / "pred", "", i));
  }
  FeatureExtractor fx(FeatureExtractorSpec::vggface_like(0.125), 9);
  const MetricsRecord summary =
      evaluate_dirs(tmp.path() / "pred", tmp.path() / "gt", tmp.path() / "metrics.json", fx);
  CHECK(summary.count == 3);
  CHECK(summary.psnr > 10.0);

  std::ifstream in(tmp.path() / "metrics.json");
  std::string line;
  int frames = 0, summaries = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") == "frame") ++frames;
    if (j.at("type") == "summary") {
      ++summaries;
      CHECK(j.at("count").get<int>() == 3);
    }
  }
  CHECK(frames == 3);
  CHECK(summaries == 1);
}

TEST_CASE("evaluate_dirs rejects misaligned directories") {
  testutil::TempDir tmp("evaluate_mismatch");
  std::mt19937_64 rng(4);
  fs::create_directories(tmp.path() / "pred");
  fs::create_directories(tmp.path() / "gt");
  save_png(testutil::random_frame(32, 32, rng), frame_path(tmp.path() / "pred", "", 0));
  save_png(testutil::random_frame(32, 32, rng), frame_path(tmp.path() / "gt", "", 0));
  save_png(testutil::random_frame(32, 32, rng), frame_path(tmp.path() / "gt", "", 1));
  FeatureExtractor fx(FeatureExtractorSpec::identity(), 0);
  CHECK_THROWS_AS(
      evaluate_dirs(tmp.path() / "pred", tmp.path() / "gt", tmp.path() / "m.json", fx), DataError);
}

TEST_CASE("report grids have the layout-arithmetic dimensions") {
  testutil::TempDir tmp("report");
  std::mt19937_64 rng(5);
  const int cell = 32;
  // three sources x six frames, each with a recognizable constant color
  const std::vector<std::string> dirs = {"pix", "gt", "pred"};
  const std::vector<float> levels = {0.2f, 0.5f, 0.8f};
  for (size_t d = 0; d < dirs.size(); ++d) {
    fs::create_directories(tmp.path() / dirs[d]);
    for (int i = 0; i < 6; ++i) {
      save_png(constant_frame(cell, cell, levels[d]), frame_path(tmp.path() / dirs[d], "", i));
    }
  }
  make_report({tmp.path() / "pred"}, tmp.path() / "gt", tmp.path() / "pix",
              tmp.path() / "grid.png", 0);
  const Frame grid = load_png(tmp.path() / "grid.png");
  CHECK(grid.height == 3 * cell);  // input | GT | output rows
  CHECK(grid.width == 6 * cell);
  // row order: pixelated, ground truth, then predictions in argument order
  CHECK(grid.at(0 * cell + 5, 5, 0) == doctest::Approx(0.2f).epsilon(0.01));
  CHECK(grid.at(1 * cell + 5, 5, 0) == doctest::Approx(0.5f).epsilon(0.01));
  CHECK(grid.at(2 * cell + 5, 5, 0) == doctest::Approx(0.8f).epsilon(0.01));

  // single frame becomes a strip
  make_report({tmp.path() / "pred"}, tmp.path() / "gt", tmp.path() / "pix",
              tmp.path() / "strip.png", 1);
  const Frame strip = load_png(tmp.path() / "strip.png");
  CHECK(strip.height == 3 * cell);
  CHECK(strip.width == cell);
}

TEST_CASE("report rejects misaligned directories") {
  testutil::TempDir tmp("report_mismatch");
  for (const std::string& d : {"pix", "gt", "pred"}) {
    fs::create_directories(tmp.path() / d);
    save_png(constant_frame(16, 16, 0.5f), frame_path(tmp.path() / d, "", 0));
  }
  save_png(constant_frame(16, 16, 0.5f), frame_path(tmp.path() / "pred", "", 1));
  CHECK_THROWS_AS(make_report({tmp.path() / "pred"}, tmp.path() / "gt", tmp.path() / "pix",
                              tmp.path() / "g.png", 0),
                  DataError);
}
