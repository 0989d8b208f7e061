#pragma once

#include <filesystem>
#include <vector>

#include "depix/frame.hpp"

namespace depix {

// Deterministic renderer for test and demo clips: a soft-edged "head" disc
// with internal structure drifting over a textured background on a smooth
// sinusoidal path.
struct SyntheticClipSpec {
  int frames = 50;
  int resolution = 256;
  uint64_t seed = 0;
  double motion_amplitude = 30.0;  // px at `resolution`
  double motion_period = 40.0;     // frames per oscillation
  double edge_softness = 0.03;     // head edge transition width / head radius
  // true: the background pans with the head (translated copies of one scene);
  // false: the head moves over a static background.
  bool global_motion = false;
};

std::vector<Frame> render_synthetic_clip(const SyntheticClipSpec& spec);

// Writes the rendered frames as an ingest-ready PNG directory.
void write_synthetic_clip(const SyntheticClipSpec& spec, const std::filesystem::path& dir);

}  // namespace depix
