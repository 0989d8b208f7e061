#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "depix/data.hpp"
#include "depix/depix_trainer.hpp"
#include "depix/metrics.hpp"
#include "depix/stn_trainer.hpp"

namespace depix {

// Resolved configuration of a full run. Serialized (schema-versioned) into
// every output directory so results stay reproducible.
struct RunConfig {
  int schema_version = 1;
  uint64_t seed = 1;

  // data preparation
  int crop_resolution = 256;
  int lr_size = 16;
  int hr_size = 128;
  double test_fraction = 0.1;

  SupportWindowSpec window{2, 5};

  // aligner
  int stn_base_channels = 32;
  StnTrainConfig stn_train;

  // de-pixelizer
  int depix_base_channels = 64;
  int depix_depth = 5;
  DiscriminatorConfig disc;
  DepixTrainConfig depix_train;

  StnNetConfig stn_net_config() const;
  DepixNetConfig depix_net_config() const;
  // derived settings that depend on other fields (max_gap, channels, seeds)
  void resolve();
};

void to_json(nlohmann::ordered_json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

// Applies {"dotted.key": value} overrides onto the config's JSON form.
// Unknown keys are ConfigErrors: overrides may only touch declared keys.
RunConfig apply_overrides(const RunConfig& base, const nlohmann::json& overrides);

void write_provenance(const std::filesystem::path& run_dir, const RunConfig& cfg,
                      const std::string& command);

// ---------------------------------------------------------------------------
// Stage entry points shared by the CLI and the test suites.

// Slides the support window over the whole clip and writes one output frame
// per input frame into out_dir. Existing frames are kept unless force is set.
void infer_clip(DepixNet& generator, StnNet* aligner, const std::filesystem::path& root,
                const ClipManifest& manifest, const SupportWindowSpec& window,
                const std::filesystem::path& out_dir, bool force);

// Compares index-aligned directories of PNGs. Writes per-frame JSON lines plus
// a dataset summary line to out_json and returns the dataset record.
MetricsRecord evaluate_dirs(const std::filesystem::path& pred_dir,
                            const std::filesystem::path& gt_dir,
                            const std::filesystem::path& out_json, FeatureExtractor& extractor);

struct AblationVariant {
  std::string name;
  nlohmann::json overrides;  // dotted-key -> value
};

struct AblationPlan {
  std::vector<AblationVariant> variants;

  // {full, w/o STN, w/o disc.} plus the stack-size sweep arms
  static AblationPlan standard(const std::vector<int>& sweep_w);
  static AblationPlan from_json(const nlohmann::json& j);

  void validate() const;  // unique names
};

struct AblationRow {
  std::string name;
  MetricsRecord metrics;
  bool failed = false;
  std::string error;
  std::optional<int> stack_frames;  // F, set for sweep arms
};

struct AblationReport {
  std::vector<AblationRow> rows;
  // (F, id_sim) series from the sweep arms, ascending in F
  std::vector<std::pair<int, double>> sweep;
};

// Trains the aligner once from the base config, then trains + evaluates one
// de-pixelizer per variant. A failing variant marks its row and the run
// continues. Emits ablation.json and ablation.csv into out_dir.
AblationReport run_ablation(const AblationPlan& plan, const RunConfig& base,
                            const std::filesystem::path& dataset_root,
                            const std::filesystem::path& out_dir, std::ostream* human);

// Contact sheet: one row per source directory (pixelated, ground truth, then
// each prediction dir in the given order), one column per frame index.
void make_report(const std::vector<std::filesystem::path>& pred_dirs,
                 const std::filesystem::path& gt_dir, const std::filesystem::path& pix_dir,
                 const std::filesystem::path& out_png, int max_frames);

}  // namespace depix
