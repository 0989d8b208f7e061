#pragma once

#include <filesystem>
#include <iosfwd>
#include <random>

#include "depix/losses.hpp"
#include "depix/nets.hpp"
#include "depix/stacker.hpp"

namespace depix {

// Samples same-clip frame pairs with 1 <= |a - b| <= max_gap.
class PairSampler {
public:
  struct Pair {
    int clip = 0;
    int a = 0;  // target frame index (I_A)
    int b = 0;  // source frame index (I_B)
  };

  PairSampler(std::vector<int> clip_lengths, int max_gap);
  Pair sample(std::mt19937_64& rng) const;
  int max_gap() const { return max_gap_; }

private:
  std::vector<int> clip_lengths_;
  int max_gap_;
};

struct StnTrainConfig {
  int steps = 2000;
  int batch_size = 16;
  double lr = 2e-4;
  double lambda_recon = 1.0;
  double lambda_id = 0.1;
  int max_gap = 0;  // 0: resolved to w*d before training
  int eval_every = 100;
  int val_pairs = 64;
  int patience = 6;  // early stop after this many evals without improvement
  uint64_t seed = 1;
  int log_every = 1;  // training curves are per-step by default
};

struct StnTrainResult {
  double best_val_recon = 0.0;
  double identity_baseline = 0.0;  // val recon under the identity warp
  int steps_run = 0;
};

// Trains the aligner on LR pixelated frame pairs and writes the best-validation
// checkpoint to out_ckpt. Validation pairs are held out of training batches.
// jsonl gets one machine-readable record per logged step; human (optional)
// gets progress lines.
StnTrainResult train_stn(const std::vector<ClipFrames>& clips, const StnNetConfig& net_cfg,
                         const StnTrainConfig& cfg, const std::filesystem::path& out_ckpt,
                         std::ostream* jsonl, std::ostream* human);

}  // namespace depix
