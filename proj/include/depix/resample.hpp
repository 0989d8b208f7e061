#pragma once

#include "depix/frame.hpp"

namespace depix {

enum class KernelKind { kNearest, kBilinear, kBicubic };

struct ResampleKernel {
  KernelKind kind = KernelKind::kBilinear;
  // Sharpness parameter of the cubic convolution kernel; only read when
  // kind == kBicubic. -0.75 matches the dominant image-library convention.
  double bicubic_a = -0.75;

  static ResampleKernel nearest() { return {KernelKind::kNearest, 0.0}; }
  static ResampleKernel bilinear() { return {KernelKind::kBilinear, 0.0}; }
  static ResampleKernel bicubic(double a = -0.75) { return {KernelKind::kBicubic, a}; }
};

// Resamples to target_h x target_w using half-pixel-center source positions
// ("align corners" off) and clamp-to-edge boundaries. Output is clamped to
// [0,1]. Non-finite input pixels raise InvalidInputError.
Frame resample(const Frame& frame, int target_h, int target_w, const ResampleKernel& kernel);

// Pixelation: box-average down to lr_size x lr_size, then nearest-upsample to
// hr_size x hr_size. Output is piecewise constant on (hr/lr)-sized blocks and
// idempotent. Requires a square frame whose side is divisible by lr_size, and
// hr_size divisible by lr_size.
Frame pixelate(const Frame& frame, int lr_size, int hr_size);

// Box-average downsample by an exact integer factor. This inverts the nearest
// upsample inside pixelate bit-exactly on block-constant frames, which is how
// LR frames are recovered from stored HR-pixelated PNGs.
Frame box_downsample(const Frame& frame, int lr_size);

}  // namespace depix
