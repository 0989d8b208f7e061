#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "depix/tensor.hpp"

namespace depix::nn {

// A learnable tensor plus its accumulated gradient.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<float> w;
  std::vector<float> g;

  Param() = default;
  Param(std::string name_, std::vector<int> shape_);
  size_t size() const { return w.size(); }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.f); }
};

class Layer {
public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  // Propagates d(loss)/d(output) to d(loss)/d(input). Parameter gradients are
  // accumulated only when accumulate_param_grads is set, so a frozen net can
  // still be differentiated through.
  virtual Tensor backward(const Tensor& grad_out, bool accumulate_param_grads = true) = 0;
  virtual std::vector<Param*> params() { return {}; }
};

class Conv2d : public Layer {
public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, std::string name);

  void init_he(std::mt19937_64& rng);
  void init_zero();

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads) override;
  std::vector<Param*> params() override { return {&weight, &bias}; }

  static int out_dim(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
  }

  Param weight;  // [out_ch, in_ch*k*k]
  Param bias;    // [out_ch]
  int in_ch, out_ch, kernel, stride, pad;

private:
  Tensor x_;  // cached input; im2col is recomputed in backward
};

// Per-sample, per-channel normalization with affine parameters.
class InstanceNorm2d : public Layer {
public:
  explicit InstanceNorm2d(int channels, std::string name, double eps = 1e-5);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads) override;
  std::vector<Param*> params() override { return {&gamma, &beta}; }

  Param gamma, beta;

private:
  double eps_;
  Tensor xhat_;
  std::vector<double> inv_std_;  // one per (n, c)
};

class LeakyReLU : public Layer {
public:
  explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads) override;

private:
  float slope_;
  Tensor x_;
};

class ReLU : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads) override;

private:
  Tensor x_;
};

class Sigmoid : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads) override;

private:
  Tensor y_;
};

class NearestUpsample2x : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads) override;

private:
  int in_h_ = 0, in_w_ = 0;
};

class MaxPool2x2 : public Layer {
public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads) override;

private:
  std::vector<int32_t> argmax_;
  int in_h_ = 0, in_w_ = 0, n_ = 0, c_ = 0;
};

// Channel concatenation helpers used for skip connections.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& grad, int c_a, Tensor* grad_a, Tensor* grad_b);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer. State is owned here, keyed by parameter order.
class Adam {
public:
  Adam(std::vector<Param*> params, AdamConfig cfg);
  void zero_grad();
  void step();
  const std::vector<Param*>& params() const { return params_; }

private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace depix::nn
