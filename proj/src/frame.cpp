#include "depix/frame.hpp"

#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace depix {

bool all_finite(const std::vector<float>& v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Tensor& t) { return all_finite(t.v); }

Frame constant_frame(int h, int w, float value) {
  Frame f(h, w);
  std::fill(f.rgb.begin(), f.rgb.end(), value);
  return f;
}

void save_png(const Frame& frame, const std::filesystem::path& path) {
  if (frame.height <= 0 || frame.width <= 0) {
    throw InvalidInputError("save_png: empty frame");
  }
  cv::Mat img(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < frame.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        float v = frame.at(y, x, ch);
        v = std::min(1.f, std::max(0.f, v));
        // round half up, BGR order for OpenCV
        row[x][2 - ch] = static_cast<uchar>(std::floor(v * 255.f + 0.5f));
      }
    }
  }
  std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) {
    throw DataError("save_png: failed to write " + path.string());
  }
}

Frame load_png(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) {
    throw DataError("load_png: failed to read " + path.string());
  }
  Frame f(img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        f.at(y, x, ch) = static_cast<float>(row[x][2 - ch]) / 255.f;
      }
    }
  }
  return f;
}

Tensor frame_to_tensor(const Frame& f) {
  Tensor t(1, 3, f.height, f.width);
  frame_into_tensor(f, t, 0, 0);
  return t;
}

void frame_into_tensor(const Frame& f, Tensor& t, int sample, int c0) {
  if (t.h != f.height || t.w != f.width || c0 + 3 > t.c || sample >= t.n) {
    throw ContractError("frame_into_tensor: shape mismatch");
  }
  for (int ch = 0; ch < 3; ++ch) {
    float* dst = t.v.data() + ((static_cast<size_t>(sample) * t.c + c0 + ch) * t.h) * t.w;
    const float* src = f.rgb.data() + ch;
    for (int i = 0; i < f.height * f.width; ++i) dst[i] = src[static_cast<size_t>(i) * 3];
  }
}

Frame tensor_to_frame(const Tensor& t, int sample) {
  if (t.c != 3 || sample >= t.n) {
    throw ContractError("tensor_to_frame: need a 3-channel tensor, got " + t.shape_str());
  }
  Frame f(t.h, t.w);
  for (int ch = 0; ch < 3; ++ch) {
    const float* src = t.v.data() + ((static_cast<size_t>(sample) * t.c + ch) * t.h) * t.w;
    for (int i = 0; i < t.h * t.w; ++i) f.rgb[static_cast<size_t>(i) * 3 + ch] = src[i];
  }
  return f;
}

}  // namespace depix
