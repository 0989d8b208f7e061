#include "depix/resample.hpp"

#include <algorithm>
#include <cmath>

namespace depix {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Cubic convolution kernel with sharpness parameter a. Interpolating
// (k(0)=1, k(n)=0 for integer n != 0) and a partition of unity on the
// integer grid for every a.
inline double cubic_weight(double x, double a) {
  x = std::fabs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct AxisTap {
  int idx[4];
  double w[4];
  int count;
};

// Source taps and weights for one output index on an axis, half-pixel-center
// convention with edge clamping.
AxisTap axis_taps(int out_i, int out_n, int in_n, const ResampleKernel& kernel) {
  AxisTap t{};
  const double src = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
  switch (kernel.kind) {
    case KernelKind::kNearest: {
      t.count = 1;
      t.idx[0] = clampi(static_cast<int>(std::floor(src + 0.5)), 0, in_n - 1);
      t.w[0] = 1.0;
      break;
    }
    case KernelKind::kBilinear: {
      const int i0 = static_cast<int>(std::floor(src));
      const double f = src - i0;
      t.count = 2;
      t.idx[0] = clampi(i0, 0, in_n - 1);
      t.idx[1] = clampi(i0 + 1, 0, in_n - 1);
      t.w[0] = 1.0 - f;
      t.w[1] = f;
      break;
    }
    case KernelKind::kBicubic: {
      const int i0 = static_cast<int>(std::floor(src));
      const double f = src - i0;
      t.count = 4;
      for (int k = 0; k < 4; ++k) {
        t.idx[k] = clampi(i0 - 1 + k, 0, in_n - 1);
        t.w[k] = cubic_weight(f + 1.0 - k, kernel.bicubic_a);
      }
      break;
    }
  }
  return t;
}

}  // namespace

Frame resample(const Frame& frame, int target_h, int target_w, const ResampleKernel& kernel) {
  if (target_h < 1 || target_w < 1) {
    throw ContractError("resample: target size must be >= 1");
  }
  if (!all_finite(frame.rgb)) {
    throw InvalidInputError("resample: input frame contains non-finite pixels");
  }

  // Separable two-pass: rows first at source height, then columns.
  std::vector<AxisTap> col_taps(target_w);
  for (int x = 0; x < target_w; ++x) col_taps[x] = axis_taps(x, target_w, frame.width, kernel);
  std::vector<AxisTap> row_taps(target_h);
  for (int y = 0; y < target_h; ++y) row_taps[y] = axis_taps(y, target_h, frame.height, kernel);

  std::vector<double> horiz(static_cast<size_t>(frame.height) * target_w * 3);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < target_w; ++x) {
      const AxisTap& t = col_taps[x];
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int k = 0; k < t.count; ++k) acc += t.w[k] * frame.at(y, t.idx[k], ch);
        horiz[(static_cast<size_t>(y) * target_w + x) * 3 + ch] = acc;
      }
    }
  }

  Frame out(target_h, target_w);
  out.clip_id = frame.clip_id;
  out.frame_index = frame.frame_index;
  for (int y = 0; y < target_h; ++y) {
    const AxisTap& t = row_taps[y];
    for (int x = 0; x < target_w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int k = 0; k < t.count; ++k) {
          acc += t.w[k] * horiz[(static_cast<size_t>(t.idx[k]) * target_w + x) * 3 + ch];
        }
        out.at(y, x, ch) = static_cast<float>(std::min(1.0, std::max(0.0, acc)));
      }
    }
  }
  return out;
}

Frame box_downsample(const Frame& frame, int lr_size) {
  if (frame.height != frame.width) {
    throw ContractError("box_downsample: frame must be square");
  }
  if (lr_size < 1 || lr_size > frame.height) {
    throw ConfigError("box_downsample: lr_size " + std::to_string(lr_size) +
                      " exceeds frame resolution " + std::to_string(frame.height));
  }
  if (frame.height % lr_size != 0) {
    throw ConfigError("box_downsample: frame resolution " + std::to_string(frame.height) +
                      " not divisible by lr_size " + std::to_string(lr_size));
  }
  const int block = frame.height / lr_size;
  Frame out(lr_size, lr_size);
  out.clip_id = frame.clip_id;
  out.frame_index = frame.frame_index;
  for (int by = 0; by < lr_size; ++by) {
    for (int bx = 0; bx < lr_size; ++bx) {
      for (int ch = 0; ch < 3; ++ch) {
        // Constant blocks pass through bit-exactly; this also makes
        // pixelate idempotent without relying on summation order.
        const float first = frame.at(by * block, bx * block, ch);
        bool constant = true;
        double acc = 0.0;
        for (int y = 0; y < block; ++y) {
          for (int x = 0; x < block; ++x) {
            const float v = frame.at(by * block + y, bx * block + x, ch);
            constant = constant && (v == first);
            acc += v;
          }
        }
        out.at(by, bx, ch) =
            constant ? first : static_cast<float>(acc / (static_cast<double>(block) * block));
      }
    }
  }
  return out;
}

Frame pixelate(const Frame& frame, int lr_size, int hr_size) {
  if (frame.height != frame.width) {
    throw ContractError("pixelate: frame must be square");
  }
  if (lr_size > frame.height) {
    throw ConfigError("pixelate: lr_size " + std::to_string(lr_size) +
                      " exceeds frame resolution " + std::to_string(frame.height));
  }
  if (lr_size < 1 || hr_size < 1 || hr_size % lr_size != 0) {
    throw ConfigError("pixelate: hr_size must be a positive multiple of lr_size");
  }
  if (frame.height % lr_size != 0) {
    throw ConfigError("pixelate: frame resolution " + std::to_string(frame.height) +
                      " not divisible by lr_size " + std::to_string(lr_size));
  }
  const Frame lr = box_downsample(frame, lr_size);
  const int block = hr_size / lr_size;
  Frame out(hr_size, hr_size);
  out.clip_id = frame.clip_id;
  out.frame_index = frame.frame_index;
  for (int y = 0; y < hr_size; ++y) {
    for (int x = 0; x < hr_size; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        out.at(y, x, ch) = lr.at(y / block, x / block, ch);
      }
    }
  }
  return out;
}

}  // namespace depix
