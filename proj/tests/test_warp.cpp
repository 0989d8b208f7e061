#include <cmath>
#include <random>

#include "depix/warp.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace depix;

namespace {

// Mean absolute difference, used as the scalar loss in gradient checks.
double l1(const Frame& a, const Frame& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i) acc += std::fabs(static_cast<double>(a.rgb[i]) - b.rgb[i]);
  return acc / a.rgb.size();
}

// d l1 / d a, with b fixed.
Frame l1_grad(const Frame& a, const Frame& b) {
  Frame g(a.height, a.width);
  const double inv = 1.0 / a.rgb.size();
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    g.rgb[i] = static_cast<float>((a.rgb[i] > b.rgb[i] ? 1.0 : (a.rgb[i] < b.rgb[i] ? -1.0 : 0.0)) * inv);
  }
  return g;
}

}  // namespace

TEST_CASE("identity grid coordinates at resolution 2") {
  const WarpGrid g = identity_grid(2);
  const double c = 0.5;
  CHECK(g.x(0, 0) == doctest::Approx(-c));
  CHECK(g.y(0, 0) == doctest::Approx(-c));
  CHECK(g.x(0, 1) == doctest::Approx(c));
  CHECK(g.y(0, 1) == doctest::Approx(-c));
  CHECK(g.x(1, 0) == doctest::Approx(-c));
  CHECK(g.y(1, 0) == doctest::Approx(c));
  CHECK(g.x(1, 1) == doctest::Approx(c));
  CHECK(g.y(1, 1) == doctest::Approx(c));
}

TEST_CASE("warp with the identity grid is the identity map") {
  std::mt19937_64 rng(21);
  for (int res : {8, 16, 128}) {
    const Frame f = testutil::random_frame(res, res, rng);
    const Frame out = warp(f, identity_grid(res));
    CHECK(testutil::max_abs_diff(f, out) < 1e-6);
  }
}

TEST_CASE("identity grid resolution must be at least 2") {
  CHECK_THROWS_AS(identity_grid(1), ContractError);
}

TEST_CASE("warp rejects resolution mismatch") {
  const Frame f = constant_frame(16, 16, 0.5f);
  CHECK_THROWS_AS(warp(f, identity_grid(8)), ContractError);
}

TEST_CASE("upsample_grid maps identity to identity exactly") {
  const WarpGrid up = upsample_grid(identity_grid(8), 128);
  const WarpGrid expect = identity_grid(128);
  double m = 0.0;
  for (size_t i = 0; i < up.xy.size(); ++i) m = std::max(m, std::fabs(up.xy[i] - expect.xy[i]));
  CHECK(m < 1e-6);
}

TEST_CASE("upsample_grid with target == resolution returns the input bit-identically") {
  std::mt19937_64 rng(4);
  const WarpGrid g = testutil::random_grid(8, rng);
  const WarpGrid out = upsample_grid(g, 8);
  REQUIRE(out.xy.size() == g.xy.size());
  for (size_t i = 0; i < g.xy.size(); ++i) CHECK(out.xy[i] == g.xy[i]);
}

TEST_CASE("upsample_grid reproduces constant offsets exactly") {
  WarpGrid g = identity_grid(8);
  for (int gy = 0; gy < 8; ++gy)
    for (int gx = 0; gx < 8; ++gx) g.x(gy, gx) += 0.1;
  const WarpGrid up = upsample_grid(g, 128);
  const WarpGrid id = identity_grid(128);
  for (int gy = 0; gy < 128; ++gy) {
    for (int gx = 0; gx < 128; ++gx) {
      CHECK(std::fabs(up.x(gy, gx) - (id.x(gy, gx) + 0.1)) < 1e-9);
      CHECK(std::fabs(up.y(gy, gx) - id.y(gy, gx)) < 1e-9);
    }
  }
}

TEST_CASE("upsample_grid preserves field corners") {
  std::mt19937_64 rng(17);
  // affine field: value = a*x_center + b*y_center + c per channel
  WarpGrid g(8);
  const double ax = 0.7, bx = -0.2, cx = 0.05, ay = 0.1, by = 0.9, cy = -0.03;
  for (int gy = 0; gy < 8; ++gy) {
    for (int gx = 0; gx < 8; ++gx) {
      const double u = pixel_center_coord(gx, 8), v = pixel_center_coord(gy, 8);
      g.x(gy, gx) = ax * u + bx * v + cx;
      g.y(gy, gx) = ay * u + by * v + cy;
    }
  }
  const WarpGrid up = upsample_grid(g, 64);
  for (int gy : {0, 63}) {
    for (int gx : {0, 63}) {
      const double u = pixel_center_coord(gx, 64), v = pixel_center_coord(gy, 64);
      CHECK(std::fabs(up.x(gy, gx) - (ax * u + bx * v + cx)) < 1e-9);
      CHECK(std::fabs(up.y(gy, gx) - (ay * u + by * v + cy)) < 1e-9);
    }
  }
}

TEST_CASE("integer translation grid shifts the image with edge fill") {
  std::mt19937_64 rng(31);
  const int res = 16;
  const Frame f = testutil::random_frame(res, res, rng);
  WarpGrid g = identity_grid(res);
  const int shift = 2;
  for (int gy = 0; gy < res; ++gy) {
    for (int gx = 0; gx < res; ++gx) g.x(gy, gx) += 2.0 * shift / res;
  }
  const Frame out = warp(f, g);
  // index-shift oracle: out[y][x] == in[y][min(x+shift, res-1)]
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const int sx = std::min(x + shift, res - 1);
      for (int ch = 0; ch < 3; ++ch) {
        CHECK(std::fabs(out.at(y, x, ch) - f.at(y, sx, ch)) < 1e-6);
      }
    }
  }
}

TEST_CASE("warp gradients match central finite differences") {
  // L = l1(target, warp(frame, grid)); inputs are kept away from the bilinear
  // kinks (integer positions, border clamps) and the l1 kink (zero diffs), so
  // the finite-difference quotient is meaningful.
  const int res = 8;
  const double eps = 1e-3;
  double worst_grid = 0.0, worst_frame = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const Frame frame = testutil::random_frame(res, res, rng, 0.2f, 0.8f);
    const Frame target = testutil::random_frame(res, res, rng, 1.2f, 1.8f);
    const WarpGrid grid = testutil::kink_safe_random_grid(res, rng);

    const Frame warped = warp(frame, grid);
    const Frame gout = l1_grad(warped, target);
    Frame gframe;
    WarpGrid ggrid;
    warp_backward(frame, grid, gout, &gframe, &ggrid);

    auto loss_with_grid = [&](const WarpGrid& g2) { return l1(warp(frame, g2), target); };
    for (size_t i = 0; i < grid.xy.size(); ++i) {
      WarpGrid gp = grid, gm = grid;
      gp.xy[i] += eps;
      gm.xy[i] -= eps;
      const double fd = (loss_with_grid(gp) - loss_with_grid(gm)) / (2 * eps);
      const double an = ggrid.xy[i];
      const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-4});
      worst_grid = std::max(worst_grid, rel);
    }
    auto loss_with_frame = [&](const Frame& f2) { return l1(warp(f2, grid), target); };
    for (size_t i = 0; i < frame.rgb.size(); ++i) {
      Frame fp = frame, fm = frame;
      fp.rgb[i] += static_cast<float>(eps);
      fm.rgb[i] -= static_cast<float>(eps);
      const double fd = (loss_with_frame(fp) - loss_with_frame(fm)) / (2 * eps);
      const double an = gframe.rgb[i];
      const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-4});
      worst_frame = std::max(worst_frame, rel);
    }
  }
  CHECK(worst_grid < 1e-2);
  CHECK(worst_frame < 1e-2);
}

TEST_CASE("upsample_grid_backward is the exact adjoint of upsample_grid") {
  // <up(g), h> == <g, up_T(h)> for a linear map and its transpose
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  WarpGrid g(8);
  for (auto& v : g.xy) v = dist(rng);
  WarpGrid h(32);
  for (auto& v : h.xy) v = dist(rng);

  const WarpGrid up = upsample_grid(g, 32);
  const WarpGrid ht = upsample_grid_backward(h, 8);
  double lhs = 0.0, rhs = 0.0;
  for (size_t i = 0; i < up.xy.size(); ++i) lhs += up.xy[i] * h.xy[i];
  for (size_t i = 0; i < g.xy.size(); ++i) rhs += g.xy[i] * ht.xy[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("warp of a constant frame is constant for any grid") {
  std::mt19937_64 rng(41);
  const Frame f = constant_frame(16, 16, 0.37f);
  const WarpGrid g = testutil::random_grid(16, rng, 1.5);  // includes out-of-range coords
  const Frame out = warp(f, g);
  for (float v : out.rgb) CHECK(std::fabs(v - 0.37f) < 1e-7f);
}
