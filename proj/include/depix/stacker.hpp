#pragma once

#include <filesystem>
#include <vector>

#include "depix/data.hpp"
#include "depix/frame.hpp"
#include "depix/nets.hpp"

namespace depix {

// Support window around a center frame: F = 2w+1 frames at spacing d.
struct SupportWindowSpec {
  int w = 2;  // half-window count
  int d = 5;  // frame spacing

  int stack_frames() const { return 2 * w + 1; }  // F
  int stack_channels() const { return 3 * stack_frames(); }

  void validate() const {
    if (w < 0) throw ConfigError("SupportWindowSpec: w must be >= 0");
    if (d < 1) throw ConfigError("SupportWindowSpec: d must be >= 1");
  }
};

// The F indices {c + d*j : j = -w..w}, each clamped into [0, clip_len-1].
// Ascending by construction; the center always sits at position w.
std::vector<int> window_indices(int c, const SupportWindowSpec& spec, int clip_len);

// One clip's frames in the two representations stacking needs: the true LR
// pixelated frames (aligner input) and their bicubic upsamples to hr_size
// (stack content).
struct ClipFrames {
  std::string clip_id;
  int lr_size = 0;
  int hr_size = 0;
  std::vector<Frame> lr;
  std::vector<Frame> hr_up;

  int size() const { return static_cast<int>(lr.size()); }
};

// Loads a clip's pixelated frames from disk and derives both representations.
// The stored pixelated PNGs are block-constant, so box downsampling recovers
// the LR frames exactly.
ClipFrames load_clip_frames(const std::filesystem::path& root, const ClipManifest& manifest);

// In-memory variant used by trainers and fixtures.
ClipFrames clip_frames_from_pixelated(const std::vector<Frame>& pix_hr, int lr_size,
                                      const std::string& clip_id);

struct FrameStack {
  int center_index = 0;
  std::vector<int> source_indices;
  Tensor channels;  // [1, 3F, hr, hr]
};

// Builds the aligned stack for center frame c. Every non-center position is
// warped by the grid the aligner predicts for (center, support) pairs at LR,
// upsampled to hr_size; the center block is the unwarped bicubic upsample.
// A null aligner means identity grids (the unaligned ablation arm).
FrameStack build_stack(const ClipFrames& clip, int c, const SupportWindowSpec& spec,
                       StnNet* aligner);

// Optional on-disk cache for built stacks, keyed by
// (clip_id, center, w, d, aligner digest).
class StackCache {
public:
  StackCache(std::filesystem::path dir, uint64_t aligner_digest);
  bool load(const std::string& clip_id, int c, const SupportWindowSpec& spec, Tensor* out) const;
  void store(const std::string& clip_id, int c, const SupportWindowSpec& spec,
             const Tensor& channels) const;

private:
  std::filesystem::path key_path(const std::string& clip_id, int c,
                                 const SupportWindowSpec& spec) const;
  std::filesystem::path dir_;
  uint64_t digest_;
};

}  // namespace depix
