#include "depix/synthetic.hpp"

#include <cmath>
#include <random>

namespace depix {

namespace {

struct Blob {
  double cx, cy, radius, strength;
  int channel;
};

}  // namespace

std::vector<Frame> render_synthetic_clip(const SyntheticClipSpec& spec) {
  const int res = spec.resolution;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // static background: smooth gradient plus a handful of soft color blobs
  const double g0 = 0.25 + 0.2 * unit(rng);
  const double gx = 0.3 * (unit(rng) - 0.5);
  const double gy = 0.3 * (unit(rng) - 0.5);
  std::vector<Blob> bg_blobs;
  for (int i = 0; i < 6; ++i) {
    bg_blobs.push_back({unit(rng) * res, unit(rng) * res, (0.08 + 0.1 * unit(rng)) * res,
                        0.25 * (unit(rng) - 0.5), static_cast<int>(rng() % 3)});
  }
  const double phase = 2.0 * M_PI * unit(rng);
  const double phase_y = 2.0 * M_PI * unit(rng);

  std::vector<Frame> frames;
  frames.reserve(spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    Frame f(res, res);
    f.frame_index = t;
    const double omega = 2.0 * M_PI / spec.motion_period;
    const double hx = res * 0.5 + spec.motion_amplitude * std::sin(omega * t + phase);
    const double hy = res * 0.5 + 0.6 * spec.motion_amplitude * std::sin(0.7 * omega * t + phase_y);
    const double head_r = res * 0.28 * (1.0 + 0.04 * std::sin(0.5 * omega * t));
    const double eye_dx = head_r * 0.38, eye_dy = head_r * 0.25, eye_r = head_r * 0.16;
    const double mouth_dy = head_r * 0.42, mouth_w = head_r * 0.45, mouth_h = head_r * 0.12;

    // under global motion the whole scene pans along the head path
    const double sx = spec.global_motion ? hx - res * 0.5 : 0.0;
    const double sy = spec.global_motion ? hy - res * 0.5 : 0.0;
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        double rgb[3];
        const double base = g0 + gx * ((x - sx) / static_cast<double>(res) - 0.5) +
                            gy * ((y - sy) / static_cast<double>(res) - 0.5);
        rgb[0] = base;
        rgb[1] = base * 0.95;
        rgb[2] = base * 1.05;
        for (const Blob& b : bg_blobs) {
          const double bx = b.cx + sx, by = b.cy + sy;
          const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
          rgb[b.channel] += b.strength * std::exp(-d2 / (2.0 * b.radius * b.radius));
        }

        // head disc with smooth edge and radial shading
        const double dx = x - hx, dy = y - hy;
        const double dist = std::sqrt(dx * dx + dy * dy);
        const double head =
            1.0 / (1.0 + std::exp((dist - head_r) / (spec.edge_softness * head_r)));
        if (head > 1e-4) {
          const double shade = 0.75 - 0.25 * (dist / head_r);
          double hr = 0.85 * shade + 0.1;
          double hg = 0.62 * shade + 0.08;
          double hb = 0.48 * shade + 0.06;
          // eyes
          for (double side : {-1.0, 1.0}) {
            const double ex = dx - side * eye_dx, ey = dy + eye_dy;
            const double e2 = ex * ex + ey * ey;
            const double eye = std::exp(-e2 / (2.0 * eye_r * eye_r));
            hr -= 0.55 * eye;
            hg -= 0.45 * eye;
            hb -= 0.35 * eye;
          }
          // mouth bar
          const double mx = dx / mouth_w, my = (dy - mouth_dy) / mouth_h;
          const double mouth = std::exp(-(mx * mx + my * my));
          hr -= 0.30 * mouth;
          hg -= 0.35 * mouth;
          hb -= 0.30 * mouth;
          rgb[0] = (1.0 - head) * rgb[0] + head * hr;
          rgb[1] = (1.0 - head) * rgb[1] + head * hg;
          rgb[2] = (1.0 - head) * rgb[2] + head * hb;
        }
        for (int ch = 0; ch < 3; ++ch) {
          f.at(y, x, ch) = static_cast<float>(std::min(1.0, std::max(0.0, rgb[ch])));
        }
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_synthetic_clip(const SyntheticClipSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<Frame> frames = render_synthetic_clip(spec);
  for (size_t i = 0; i < frames.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "%05zu.png", i);
    save_png(frames[i], dir / name);
  }
}

}  // namespace depix
