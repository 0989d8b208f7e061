#include "depix/nn.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace depix::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// col layout: [in_ch*k*k, oh*ow], row-major.
void im2col(const float* x, int c, int h, int w, int kernel, int stride, int pad, int oh, int ow,
            float* col) {
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        float* dst = col + (static_cast<size_t>((ic * kernel + ky) * kernel + kx)) * oh * ow;
        const float* src = x + static_cast<size_t>(ic) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, 0.f);
            dst += ow;
            continue;
          }
          const float* row = src + static_cast<size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            *dst++ = (ix >= 0 && ix < w) ? row[ix] : 0.f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, int kernel, int stride, int pad, int oh, int ow,
            float* x) {
  std::fill(x, x + static_cast<size_t>(c) * h * w, 0.f);
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const float* src = col + (static_cast<size_t>((ic * kernel + ky) * kernel + kx)) * oh * ow;
        float* dst = x + static_cast<size_t>(ic) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            src += ow;
            continue;
          }
          float* row = dst + static_cast<size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox, ++src) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) row[ix] += *src;
          }
        }
      }
    }
  }
}

}  // namespace

Param::Param(std::string name_, std::vector<int> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
  size_t total = 1;
  for (int d : shape) total *= static_cast<size_t>(d);
  w.assign(total, 0.f);
  g.assign(total, 0.f);
}

Conv2d::Conv2d(int in_ch_, int out_ch_, int kernel_, int stride_, int pad_, std::string name)
    : weight(name + ".weight", {out_ch_, in_ch_ * kernel_ * kernel_}),
      bias(name + ".bias", {out_ch_}),
      in_ch(in_ch_),
      out_ch(out_ch_),
      kernel(kernel_),
      stride(stride_),
      pad(pad_) {}

void Conv2d::init_he(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in_ch) * kernel * kernel;
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& v : weight.w) v = static_cast<float>(dist(rng));
  std::fill(bias.w.begin(), bias.w.end(), 0.f);
}

void Conv2d::init_zero() {
  std::fill(weight.w.begin(), weight.w.end(), 0.f);
  std::fill(bias.w.begin(), bias.w.end(), 0.f);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.c != in_ch) {
    throw ContractError(weight.name + ": expected " + std::to_string(in_ch) + " channels, got " +
                        x.shape_str());
  }
  x_ = x;
  const int oh = out_dim(x.h, kernel, stride, pad);
  const int ow = out_dim(x.w, kernel, stride, pad);
  Tensor y(x.n, out_ch, oh, ow);
  const int k2 = in_ch * kernel * kernel;
  std::vector<float> col(static_cast<size_t>(k2) * oh * ow);
  ConstRowMap wmap(weight.w.data(), out_ch, k2);
  for (int s = 0; s < x.n; ++s) {
    im2col(x.sample(s), in_ch, x.h, x.w, kernel, stride, pad, oh, ow, col.data());
    ConstRowMap cmap(col.data(), k2, oh * ow);
    RowMap ymap(y.sample(s), out_ch, oh * ow);
    ymap.noalias() = wmap * cmap;
    for (int oc = 0; oc < out_ch; ++oc) ymap.row(oc).array() += bias.w[oc];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, bool accumulate_param_grads) {
  const int oh = grad_out.h, ow = grad_out.w;
  const int k2 = in_ch * kernel * kernel;
  Tensor dx(x_.n, in_ch, x_.h, x_.w);
  std::vector<float> col(static_cast<size_t>(k2) * oh * ow);
  std::vector<float> dcol(static_cast<size_t>(k2) * oh * ow);
  ConstRowMap wmap(weight.w.data(), out_ch, k2);
  RowMap dwmap(weight.g.data(), out_ch, k2);
  for (int s = 0; s < x_.n; ++s) {
    ConstRowMap gmap(grad_out.sample(s), out_ch, oh * ow);
    if (accumulate_param_grads) {
      im2col(x_.sample(s), in_ch, x_.h, x_.w, kernel, stride, pad, oh, ow, col.data());
      ConstRowMap cmap(col.data(), k2, oh * ow);
      dwmap.noalias() += gmap * cmap.transpose();
      for (int oc = 0; oc < out_ch; ++oc) bias.g[oc] += gmap.row(oc).sum();
    }
    RowMap dcmap(dcol.data(), k2, oh * ow);
    dcmap.noalias() = wmap.transpose() * gmap;
    col2im(dcol.data(), in_ch, x_.h, x_.w, kernel, stride, pad, oh, ow, dx.sample(s));
  }
  return dx;
}

InstanceNorm2d::InstanceNorm2d(int channels, std::string name, double eps)
    : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}), eps_(eps) {
  std::fill(gamma.w.begin(), gamma.w.end(), 1.f);
}

Tensor InstanceNorm2d::forward(const Tensor& x) {
  if (x.c != static_cast<int>(gamma.w.size())) {
    throw ContractError(gamma.name + ": channel mismatch " + x.shape_str());
  }
  const int m = x.plane();
  Tensor y(x.n, x.c, x.h, x.w);
  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  inv_std_.assign(static_cast<size_t>(x.n) * x.c, 0.0);
  for (int s = 0; s < x.n; ++s) {
    for (int ic = 0; ic < x.c; ++ic) {
      const float* px = x.v.data() + ((static_cast<size_t>(s) * x.c + ic) * m);
      float* ph = xhat_.v.data() + ((static_cast<size_t>(s) * x.c + ic) * m);
      float* py = y.v.data() + ((static_cast<size_t>(s) * x.c + ic) * m);
      double mean = 0.0;
      for (int i = 0; i < m; ++i) mean += px[i];
      mean /= m;
      double var = 0.0;
      for (int i = 0; i < m; ++i) {
        const double d = px[i] - mean;
        var += d * d;
      }
      var /= m;
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[static_cast<size_t>(s) * x.c + ic] = inv;
      const float g = gamma.w[ic], b = beta.w[ic];
      for (int i = 0; i < m; ++i) {
        const float xh = static_cast<float>((px[i] - mean) * inv);
        ph[i] = xh;
        py[i] = g * xh + b;
      }
    }
  }
  return y;
}

Tensor InstanceNorm2d::backward(const Tensor& grad_out, bool accumulate_param_grads) {
  const int m = grad_out.plane();
  Tensor dx(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  for (int s = 0; s < grad_out.n; ++s) {
    for (int ic = 0; ic < grad_out.c; ++ic) {
      const size_t base = (static_cast<size_t>(s) * grad_out.c + ic) * m;
      const float* go = grad_out.v.data() + base;
      const float* xh = xhat_.v.data() + base;
      float* pdx = dx.v.data() + base;
      const double inv = inv_std_[static_cast<size_t>(s) * grad_out.c + ic];
      const double g = gamma.w[ic];
      double sum_g = 0.0, sum_gx = 0.0;
      for (int i = 0; i < m; ++i) {
        sum_g += go[i];
        sum_gx += static_cast<double>(go[i]) * xh[i];
      }
      if (accumulate_param_grads) {
        gamma.g[ic] += static_cast<float>(sum_gx);
        beta.g[ic] += static_cast<float>(sum_g);
      }
      const double mean_g = sum_g / m, mean_gx = sum_gx / m;
      for (int i = 0; i < m; ++i) {
        pdx[i] = static_cast<float>(g * inv * (go[i] - mean_g - xh[i] * mean_gx));
      }
    }
  }
  return dx;
}

Tensor LeakyReLU::forward(const Tensor& x) {
  x_ = x;
  Tensor y = x;
  for (auto& v : y.v) v = v >= 0.f ? v : slope_ * v;
  return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out, bool) {
  Tensor dx = grad_out;
  for (size_t i = 0; i < dx.v.size(); ++i) {
    if (x_.v[i] < 0.f) dx.v[i] *= slope_;
  }
  return dx;
}

Tensor ReLU::forward(const Tensor& x) {
  x_ = x;
  Tensor y = x;
  for (auto& v : y.v) v = v >= 0.f ? v : 0.f;
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out, bool) {
  Tensor dx = grad_out;
  for (size_t i = 0; i < dx.v.size(); ++i) {
    if (x_.v[i] < 0.f) dx.v[i] = 0.f;
  }
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.v) v = 1.f / (1.f + std::exp(-v));
  y_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out, bool) {
  Tensor dx = grad_out;
  for (size_t i = 0; i < dx.v.size(); ++i) {
    dx.v[i] *= y_.v[i] * (1.f - y_.v[i]);
  }
  return dx;
}

Tensor NearestUpsample2x::forward(const Tensor& x) {
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor y(x.n, x.c, x.h * 2, x.w * 2);
  for (int s = 0; s < x.n; ++s) {
    for (int ic = 0; ic < x.c; ++ic) {
      const float* src = x.v.data() + (static_cast<size_t>(s) * x.c + ic) * x.plane();
      float* dst = y.v.data() + (static_cast<size_t>(s) * x.c + ic) * y.plane();
      for (int iy = 0; iy < x.h; ++iy) {
        for (int ix = 0; ix < x.w; ++ix) {
          const float v = src[iy * x.w + ix];
          float* d = dst + (2 * iy) * y.w + 2 * ix;
          d[0] = v;
          d[1] = v;
          d[y.w] = v;
          d[y.w + 1] = v;
        }
      }
    }
  }
  return y;
}

Tensor NearestUpsample2x::backward(const Tensor& grad_out, bool) {
  Tensor dx(grad_out.n, grad_out.c, in_h_, in_w_);
  for (int s = 0; s < grad_out.n; ++s) {
    for (int ic = 0; ic < grad_out.c; ++ic) {
      const float* src = grad_out.v.data() + (static_cast<size_t>(s) * grad_out.c + ic) * grad_out.plane();
      float* dst = dx.v.data() + (static_cast<size_t>(s) * dx.c + ic) * dx.plane();
      for (int iy = 0; iy < in_h_; ++iy) {
        for (int ix = 0; ix < in_w_; ++ix) {
          const float* sp = src + (2 * iy) * grad_out.w + 2 * ix;
          dst[iy * in_w_ + ix] = sp[0] + sp[1] + sp[grad_out.w] + sp[grad_out.w + 1];
        }
      }
    }
  }
  return dx;
}

Tensor MaxPool2x2::forward(const Tensor& x) {
  n_ = x.n;
  c_ = x.c;
  in_h_ = x.h;
  in_w_ = x.w;
  const int oh = x.h / 2, ow = x.w / 2;
  Tensor y(x.n, x.c, oh, ow);
  argmax_.assign(y.size(), 0);
  for (int s = 0; s < x.n; ++s) {
    for (int ic = 0; ic < x.c; ++ic) {
      const float* src = x.v.data() + (static_cast<size_t>(s) * x.c + ic) * x.plane();
      const size_t obase = (static_cast<size_t>(s) * x.c + ic) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          int best = (2 * oy) * x.w + 2 * ox;
          float bv = src[best];
          const int cands[3] = {(2 * oy) * x.w + 2 * ox + 1, (2 * oy + 1) * x.w + 2 * ox,
                                (2 * oy + 1) * x.w + 2 * ox + 1};
          for (int cand : cands) {
            if (src[cand] > bv) {
              bv = src[cand];
              best = cand;
            }
          }
          y.v[obase + oy * ow + ox] = bv;
          argmax_[obase + oy * ow + ox] = best;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2x2::backward(const Tensor& grad_out, bool) {
  Tensor dx(n_, c_, in_h_, in_w_);
  const int plane = in_h_ * in_w_;
  for (int s = 0; s < n_; ++s) {
    for (int ic = 0; ic < c_; ++ic) {
      const size_t obase = (static_cast<size_t>(s) * c_ + ic) * grad_out.plane();
      float* dst = dx.v.data() + (static_cast<size_t>(s) * c_ + ic) * plane;
      for (int i = 0; i < grad_out.plane(); ++i) {
        dst[argmax_[obase + i]] += grad_out.v[obase + i];
      }
    }
  }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw ContractError("concat_channels: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  const size_t pa = static_cast<size_t>(a.c) * a.plane();
  const size_t pb = static_cast<size_t>(b.c) * b.plane();
  for (int s = 0; s < a.n; ++s) {
    std::copy(a.sample(s), a.sample(s) + pa, y.sample(s));
    std::copy(b.sample(s), b.sample(s) + pb, y.sample(s) + pa);
  }
  return y;
}

void split_channels(const Tensor& grad, int c_a, Tensor* grad_a, Tensor* grad_b) {
  const int c_b = grad.c - c_a;
  *grad_a = Tensor(grad.n, c_a, grad.h, grad.w);
  *grad_b = Tensor(grad.n, c_b, grad.h, grad.w);
  const size_t pa = static_cast<size_t>(c_a) * grad.plane();
  const size_t pb = static_cast<size_t>(c_b) * grad.plane();
  for (int s = 0; s < grad.n; ++s) {
    std::copy(grad.sample(s), grad.sample(s) + pa, grad_a->sample(s));
    std::copy(grad.sample(s) + pa, grad.sample(s) + pa + pb, grad_b->sample(s));
  }
}

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.emplace_back(p->size(), 0.f);
    v_.emplace_back(p->size(), 0.f);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Param& p = *params_[pi];
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < p.size(); ++i) {
      const double g = p.g[i];
      m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g);
      v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.w[i] -= static_cast<float>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

}  // namespace depix::nn
