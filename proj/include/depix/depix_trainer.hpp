#pragma once

#include <filesystem>
#include <iosfwd>

#include "depix/losses.hpp"
#include "depix/metrics.hpp"
#include "depix/stacker.hpp"
#include "depix/stn_trainer.hpp"

namespace depix {

struct DepixTrainConfig {
  int steps = 2000;
  int batch_size = 16;
  double lr = 2e-4;
  double beta1 = 0.5;  // adversarial-training moments
  double beta2 = 0.999;
  double lambda_r = 1.0;
  double lambda_p = 0.05;
  double lambda_adv = 0.01;
  SupportWindowSpec window;
  bool use_stn = true;  // false: identity-grid stacks (unaligned ablation)
  uint64_t seed = 1;
  int log_every = 1;
  int eval_frames = 16;  // held-out frames per evaluation pass
  std::filesystem::path vgg19_asset;    // empty: fixed-seed random substitute
  std::filesystem::path vggface_asset;  // empty: fixed-seed random substitute
  std::filesystem::path stack_cache_dir;  // empty: in-memory stacks only
  uint64_t aligner_digest = 0;            // keys the stack cache
};

// One training example: the aligned stack plus its targets.
struct TrainClip {
  ClipFrames frames;            // pixelated representations
  std::vector<Frame> gt;        // hr_size ground truth
  std::vector<Frame> pixelated; // hr_size blocky conditioning frames
};

TrainClip load_train_clip(const std::filesystem::path& root, const ClipManifest& manifest);

struct DepixTrainResult {
  double train_recon = 0.0;  // eval-mode reconstruction L1 over the train set
  double train_psnr = 0.0;
  int steps_run = 0;
};

// Alternating discriminator/generator training (one update each per batch).
// lambda_adv == 0 skips the adversary entirely. A non-finite loss aborts with
// NumericError after the last epoch checkpoint, which stays on disk.
DepixTrainResult train_depix(const std::vector<TrainClip>& train_clips,
                             const std::vector<TrainClip>& held_out, StnNet* aligner,
                             const DepixNetConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                             const DepixTrainConfig& cfg, const std::filesystem::path& out_dir,
                             std::ostream* jsonl, std::ostream* human);

}  // namespace depix
