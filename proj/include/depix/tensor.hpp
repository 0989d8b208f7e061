#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depix/errors.hpp"

namespace depix {

// Dense NCHW float tensor. The only data container the network code uses;
// kept deliberately small (no views, no strides).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.f) {}

  size_t size() const { return v.size(); }
  int plane() const { return h * w; }

  float& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  float at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  float* sample(int in) { return v.data() + static_cast<size_t>(in) * c * h * w; }
  const float* sample(int in) const { return v.data() + static_cast<size_t>(in) * c * h * w; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  std::string shape_str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + "]";
  }

  void fill(float x) { std::fill(v.begin(), v.end(), x); }
};

inline void require_shape(const Tensor& t, int n, int c, int h, int w, const char* what) {
  if (t.n != n || t.c != c || t.h != h || t.w != w) {
    throw ContractError(std::string(what) + ": expected [" + std::to_string(n) + "," +
                        std::to_string(c) + "," + std::to_string(h) + "," +
                        std::to_string(w) + "], got " + t.shape_str());
  }
}

bool all_finite(const std::vector<float>& v);
bool all_finite(const Tensor& t);

}  // namespace depix
