#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "depix/errors.hpp"
#include "depix/tensor.hpp"

namespace depix {

// One RGB frame. Pixels are interleaved HWC floats in [0,1]; all math stays in
// floating point and quantization happens only on save.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;  // height * width * 3, row-major, interleaved
  std::string clip_id;
  int frame_index = 0;

  Frame() = default;
  Frame(int h, int w)
      : height(h), width(w), rgb(static_cast<size_t>(h) * w * 3, 0.f) {}

  float& at(int y, int x, int ch) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + ch]; }
  float at(int y, int x, int ch) const { return rgb[(static_cast<size_t>(y) * width + x) * 3 + ch]; }

  bool same_shape(const Frame& o) const { return height == o.height && width == o.width; }
};

Frame constant_frame(int h, int w, float value);

// 8-bit RGB PNG persistence. Save quantizes round-half-up; load maps v/255.
void save_png(const Frame& frame, const std::filesystem::path& path);
Frame load_png(const std::filesystem::path& path);

// Frame <-> single-sample CHW tensor conversions used at network boundaries.
Tensor frame_to_tensor(const Frame& f);
Frame tensor_to_frame(const Tensor& t, int sample = 0);

// Copies frame channels into an existing tensor at channel offset `c0`.
void frame_into_tensor(const Frame& f, Tensor& t, int sample, int c0);

}  // namespace depix
