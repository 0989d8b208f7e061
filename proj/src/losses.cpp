#include "depix/losses.hpp"

#include <cmath>

namespace depix {

double l1_mean(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ContractError("l1_mean: size mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(static_cast<double>(a[i]) - b[i]);
  return acc / static_cast<double>(a.size());
}

void l1_mean_grad(std::span<const float> a, std::span<const float> b, std::span<float> grad) {
  const double inv = 1.0 / static_cast<double>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    grad[i] = static_cast<float>(a[i] > b[i] ? inv : (a[i] < b[i] ? -inv : 0.0));
  }
}

double bce_with_logits_mean(const Tensor& logits, float target) {
  double acc = 0.0;
  const double t = target;
  for (float lf : logits.v) {
    const double l = lf;
    acc += std::max(0.0, l) - l * t + std::log1p(std::exp(-std::fabs(l)));
  }
  return acc / static_cast<double>(logits.size());
}

Tensor bce_with_logits_grad(const Tensor& logits, float target) {
  Tensor g = logits;
  const double inv = 1.0 / static_cast<double>(logits.size());
  for (auto& v : g.v) {
    const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
    v = static_cast<float>((s - target) * inv);
  }
  return g;
}

double stn_reconstruction_loss(const Frame& target, const Frame& source, const WarpGrid& grid) {
  if (!target.same_shape(source)) {
    throw ContractError("stn_reconstruction_loss: frame shapes differ");
  }
  if (target.height != target.width) {
    throw ContractError("stn_reconstruction_loss: frames must be square");
  }
  const WarpGrid full = upsample_grid(grid, target.height);
  const Frame warped = warp(source, full);
  return l1_mean(target.rgb, warped.rgb);
}

double stn_identity_loss(const WarpGrid& grid) {
  const WarpGrid id = identity_grid(grid.resolution);
  double acc = 0.0;
  for (size_t i = 0; i < grid.xy.size(); ++i) acc += std::fabs(grid.xy[i] - id.xy[i]);
  return acc / static_cast<double>(grid.xy.size());
}

WarpGrid stn_identity_loss_grad(const WarpGrid& grid) {
  const WarpGrid id = identity_grid(grid.resolution);
  WarpGrid g(grid.resolution);
  const double inv = 1.0 / static_cast<double>(grid.xy.size());
  for (size_t i = 0; i < grid.xy.size(); ++i) {
    g.xy[i] = grid.xy[i] > id.xy[i] ? inv : (grid.xy[i] < id.xy[i] ? -inv : 0.0);
  }
  return g;
}

double reconstruction_loss(const Frame& pred, const Frame& gt) {
  if (!pred.same_shape(gt)) {
    throw ContractError("reconstruction_loss: frame shapes differ");
  }
  return l1_mean(pred.rgb, gt.rgb);
}

double perceptual_loss(const Frame& pred, const Frame& gt,
                       std::vector<FeatureExtractor*> extractors) {
  if (!pred.same_shape(gt)) {
    throw ContractError("perceptual_loss: frame shapes differ");
  }
  const Tensor tp = frame_to_tensor(pred);
  const Tensor tg = frame_to_tensor(gt);
  return perceptual_loss_tensor(tp, tg, std::move(extractors), nullptr);
}

double perceptual_loss_tensor(const Tensor& pred, const Tensor& gt,
                              std::vector<FeatureExtractor*> extractors, Tensor* grad_pred) {
  double total = 0.0;
  for (FeatureExtractor* fx : extractors) {
    const std::vector<Tensor> fg = fx->forward_taps(gt);
    const std::vector<Tensor> fp = fx->forward_taps(pred);  // cached last for backward
    std::vector<Tensor> tap_grads;
    if (grad_pred) tap_grads.resize(fp.size());
    for (size_t k = 0; k < fp.size(); ++k) {
      total += l1_mean(fp[k].v, fg[k].v);
      if (grad_pred) {
        tap_grads[k] = fp[k];
        l1_mean_grad(fp[k].v, fg[k].v, tap_grads[k].v);
      }
    }
    if (grad_pred) {
      const Tensor gin = fx->backward_taps(tap_grads);
      for (size_t i = 0; i < grad_pred->v.size(); ++i) grad_pred->v[i] += gin.v[i];
    }
  }
  return total;
}

AdversarialLosses adversarial_losses(PatchDiscriminator& disc, const Frame& pixelated,
                                     const Frame& pred, const Frame& gt) {
  AdversarialLosses out;
  const Tensor real_logits = disc.score(pixelated, gt);
  const Tensor fake_logits = disc.score(pixelated, pred);
  out.adv_disc =
      0.5 * (bce_with_logits_mean(real_logits, 1.f) + bce_with_logits_mean(fake_logits, 0.f));
  out.adv_gen = bce_with_logits_mean(fake_logits, 1.f);
  return out;
}

}  // namespace depix
