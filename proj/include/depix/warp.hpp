#pragma once

#include <vector>

#include "depix/frame.hpp"

namespace depix {

// Free-form warp grid: a resolution x resolution field of normalized sampling
// coordinates in [-1,1], channel order (x, y), stored interleaved per cell.
// Coordinates are kept in double so that identity round-trips survive the
// normalized<->pixel conversions well below the 1e-6 contract tolerance.
struct WarpGrid {
  int resolution = 0;
  std::vector<double> xy;  // resolution * resolution * 2, (x,y) per cell

  WarpGrid() = default;
  explicit WarpGrid(int res)
      : resolution(res), xy(static_cast<size_t>(res) * res * 2, 0.0) {}

  double& x(int gy, int gx) { return xy[(static_cast<size_t>(gy) * resolution + gx) * 2 + 0]; }
  double& y(int gy, int gx) { return xy[(static_cast<size_t>(gy) * resolution + gx) * 2 + 1]; }
  double x(int gy, int gx) const { return xy[(static_cast<size_t>(gy) * resolution + gx) * 2 + 0]; }
  double y(int gy, int gx) const { return xy[(static_cast<size_t>(gy) * resolution + gx) * 2 + 1]; }
};

// Normalized coordinate of the center of pixel i on an axis with n pixels.
inline double pixel_center_coord(int i, int n) { return (2.0 * i + 1.0) / n - 1.0; }

// Fractional pixel position of a normalized coordinate on an n-pixel axis.
inline double coord_to_pixel(double coord, int n) { return ((coord + 1.0) * n - 1.0) * 0.5; }

// Grid that maps every cell center to itself; warping with it is the identity.
WarpGrid identity_grid(int resolution);

// Bilinear upsampling of the coordinate field to target x target. The field is
// interpolated between cell centers and extrapolated linearly past the border
// centers, so affine fields (identity, constant offsets) are reproduced
// exactly. target == resolution returns the input unchanged.
WarpGrid upsample_grid(const WarpGrid& grid, int target);

// Backward warping: output pixel p bilinearly samples the input frame at
// grid(p), with coordinates clamped to the edge. Requires a square frame with
// frame side == grid resolution.
Frame warp(const Frame& frame, const WarpGrid& grid);

// --- differentiable-path companions -------------------------------------
//
// The trainers chain these by hand; each takes the upstream gradient and
// produces gradients for its inputs.

// d(loss)/d(frame), d(loss)/d(grid) given d(loss)/d(warped output).
void warp_backward(const Frame& frame, const WarpGrid& grid, const Frame& grad_out,
                   Frame* grad_frame, WarpGrid* grad_grid);

// Adjoint of upsample_grid: scatters a gradient at `target` resolution back to
// the source grid resolution.
WarpGrid upsample_grid_backward(const WarpGrid& grad_upsampled, int source_resolution);

}  // namespace depix
