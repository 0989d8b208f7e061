#include "depix/warp.hpp"

#include <algorithm>
#include <cmath>

namespace depix {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Bilinear sample setup for one normalized coordinate pair, clamp-to-edge.
// The coordinate is clamped to the valid pixel range first; past the border
// the sample is constant, so the position derivative there is zero.
struct SamplePoint {
  int x0, x1, y0, y1;
  double fx, fy;
  bool dx_live, dy_live;  // false when the coordinate was clamped
};

SamplePoint make_sample(double cx, double cy, int res) {
  SamplePoint s{};
  double px = coord_to_pixel(cx, res);
  double py = coord_to_pixel(cy, res);
  s.dx_live = px > 0.0 && px < res - 1;
  s.dy_live = py > 0.0 && py < res - 1;
  px = std::min(static_cast<double>(res - 1), std::max(0.0, px));
  py = std::min(static_cast<double>(res - 1), std::max(0.0, py));
  s.x0 = clampi(static_cast<int>(std::floor(px)), 0, res - 1);
  s.y0 = clampi(static_cast<int>(std::floor(py)), 0, res - 1);
  s.x1 = std::min(s.x0 + 1, res - 1);
  s.y1 = std::min(s.y0 + 1, res - 1);
  s.fx = px - s.x0;
  s.fy = py - s.y0;
  return s;
}

}  // namespace

WarpGrid identity_grid(int resolution) {
  if (resolution < 2) {
    throw ContractError("identity_grid: resolution must be >= 2");
  }
  WarpGrid g(resolution);
  for (int gy = 0; gy < resolution; ++gy) {
    for (int gx = 0; gx < resolution; ++gx) {
      g.x(gy, gx) = pixel_center_coord(gx, resolution);
      g.y(gy, gx) = pixel_center_coord(gy, resolution);
    }
  }
  return g;
}

WarpGrid upsample_grid(const WarpGrid& grid, int target) {
  const int res = grid.resolution;
  if (res < 2) {
    throw ContractError("upsample_grid: source grid resolution must be >= 2");
  }
  if (target < res) {
    throw ContractError("upsample_grid: target must be >= source resolution");
  }
  if (target == res) return grid;

  WarpGrid out(target);
  // Interpolation between cell centers with linear extrapolation past the
  // outermost centers; exact on affine coordinate fields.
  std::vector<int> i0(target);
  std::vector<double> t(target);
  for (int j = 0; j < target; ++j) {
    const double s = (j + 0.5) * static_cast<double>(res) / target - 0.5;
    int lo = static_cast<int>(std::floor(s));
    lo = clampi(lo, 0, res - 2);
    i0[j] = lo;
    t[j] = s - lo;
  }
  for (int gy = 0; gy < target; ++gy) {
    const int y0 = i0[gy];
    const double ty = t[gy];
    for (int gx = 0; gx < target; ++gx) {
      const int x0 = i0[gx];
      const double tx = t[gx];
      for (int ch = 0; ch < 2; ++ch) {
        const double v00 = grid.xy[(static_cast<size_t>(y0) * res + x0) * 2 + ch];
        const double v01 = grid.xy[(static_cast<size_t>(y0) * res + x0 + 1) * 2 + ch];
        const double v10 = grid.xy[(static_cast<size_t>(y0 + 1) * res + x0) * 2 + ch];
        const double v11 = grid.xy[(static_cast<size_t>(y0 + 1) * res + x0 + 1) * 2 + ch];
        const double top = (1.0 - tx) * v00 + tx * v01;
        const double bot = (1.0 - tx) * v10 + tx * v11;
        out.xy[(static_cast<size_t>(gy) * target + gx) * 2 + ch] = (1.0 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

WarpGrid upsample_grid_backward(const WarpGrid& grad_upsampled, int source_resolution) {
  const int res = source_resolution;
  const int target = grad_upsampled.resolution;
  if (target == res) return grad_upsampled;
  WarpGrid grad(res);
  std::vector<int> i0(target);
  std::vector<double> t(target);
  for (int j = 0; j < target; ++j) {
    const double s = (j + 0.5) * static_cast<double>(res) / target - 0.5;
    int lo = static_cast<int>(std::floor(s));
    lo = clampi(lo, 0, res - 2);
    i0[j] = lo;
    t[j] = s - lo;
  }
  for (int gy = 0; gy < target; ++gy) {
    const int y0 = i0[gy];
    const double ty = t[gy];
    for (int gx = 0; gx < target; ++gx) {
      const int x0 = i0[gx];
      const double tx = t[gx];
      for (int ch = 0; ch < 2; ++ch) {
        const double g = grad_upsampled.xy[(static_cast<size_t>(gy) * target + gx) * 2 + ch];
        grad.xy[(static_cast<size_t>(y0) * res + x0) * 2 + ch] += (1.0 - tx) * (1.0 - ty) * g;
        grad.xy[(static_cast<size_t>(y0) * res + x0 + 1) * 2 + ch] += tx * (1.0 - ty) * g;
        grad.xy[(static_cast<size_t>(y0 + 1) * res + x0) * 2 + ch] += (1.0 - tx) * ty * g;
        grad.xy[(static_cast<size_t>(y0 + 1) * res + x0 + 1) * 2 + ch] += tx * ty * g;
      }
    }
  }
  return grad;
}

Frame warp(const Frame& frame, const WarpGrid& grid) {
  if (frame.height != frame.width) {
    throw ContractError("warp: frame must be square");
  }
  if (frame.height != grid.resolution) {
    throw ContractError("warp: grid resolution " + std::to_string(grid.resolution) +
                        " != frame resolution " + std::to_string(frame.height));
  }
  const int res = grid.resolution;
  Frame out(res, res);
  out.clip_id = frame.clip_id;
  out.frame_index = frame.frame_index;
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const SamplePoint s = make_sample(grid.x(y, x), grid.y(y, x), res);
      const double w00 = (1.0 - s.fx) * (1.0 - s.fy);
      const double w01 = s.fx * (1.0 - s.fy);
      const double w10 = (1.0 - s.fx) * s.fy;
      const double w11 = s.fx * s.fy;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = w00 * frame.at(s.y0, s.x0, ch) + w01 * frame.at(s.y0, s.x1, ch) +
                         w10 * frame.at(s.y1, s.x0, ch) + w11 * frame.at(s.y1, s.x1, ch);
        out.at(y, x, ch) = static_cast<float>(v);
      }
    }
  }
  return out;
}

void warp_backward(const Frame& frame, const WarpGrid& grid, const Frame& grad_out,
                   Frame* grad_frame, WarpGrid* grad_grid) {
  const int res = grid.resolution;
  if (frame.height != res || frame.width != res || grad_out.height != res ||
      grad_out.width != res) {
    throw ContractError("warp_backward: shape mismatch");
  }
  if (grad_frame) *grad_frame = Frame(res, res);
  if (grad_grid) *grad_grid = WarpGrid(res);
  const double pix_per_coord = res * 0.5;  // d(pixel position)/d(normalized coord)

  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const SamplePoint s = make_sample(grid.x(y, x), grid.y(y, x), res);
      const double w00 = (1.0 - s.fx) * (1.0 - s.fy);
      const double w01 = s.fx * (1.0 - s.fy);
      const double w10 = (1.0 - s.fx) * s.fy;
      const double w11 = s.fx * s.fy;
      double dldx = 0.0, dldy = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        const double g = grad_out.at(y, x, ch);
        if (g == 0.0) continue;
        if (grad_frame) {
          grad_frame->at(s.y0, s.x0, ch) += static_cast<float>(g * w00);
          grad_frame->at(s.y0, s.x1, ch) += static_cast<float>(g * w01);
          grad_frame->at(s.y1, s.x0, ch) += static_cast<float>(g * w10);
          grad_frame->at(s.y1, s.x1, ch) += static_cast<float>(g * w11);
        }
        if (grad_grid) {
          const double v00 = frame.at(s.y0, s.x0, ch);
          const double v01 = frame.at(s.y0, s.x1, ch);
          const double v10 = frame.at(s.y1, s.x0, ch);
          const double v11 = frame.at(s.y1, s.x1, ch);
          // d(sample)/d(px), d(sample)/d(py)
          const double dvdx = (1.0 - s.fy) * (v01 - v00) + s.fy * (v11 - v10);
          const double dvdy = (1.0 - s.fx) * (v10 - v00) + s.fx * (v11 - v01);
          dldx += g * dvdx;
          dldy += g * dvdy;
        }
      }
      if (grad_grid) {
        grad_grid->x(y, x) = s.dx_live ? dldx * pix_per_coord : 0.0;
        grad_grid->y(y, x) = s.dy_live ? dldy * pix_per_coord : 0.0;
      }
    }
  }
}

}  // namespace depix
