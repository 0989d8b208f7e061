#pragma once

#include <span>

#include "depix/features.hpp"
#include "depix/frame.hpp"
#include "depix/nets.hpp"
#include "depix/warp.hpp"

namespace depix {

// ---------------------------------------------------------------------------
// Elementwise primitives (double accumulation throughout)

double l1_mean(std::span<const float> a, std::span<const float> b);

// d(l1_mean)/da written into grad (same length as a).
void l1_mean_grad(std::span<const float> a, std::span<const float> b, std::span<float> grad);

// Numerically stable binary cross-entropy with logits against a constant
// target (1 = real, 0 = fake), averaged over the map.
double bce_with_logits_mean(const Tensor& logits, float target);
Tensor bce_with_logits_grad(const Tensor& logits, float target);

// ---------------------------------------------------------------------------
// Alignment losses

// Mean absolute error between `target` and `source` warped by `grid`. The grid
// may be at the net's grid resolution; it is bilinearly upsampled to the frame
// resolution first.
double stn_reconstruction_loss(const Frame& target, const Frame& source, const WarpGrid& grid);

// Mean absolute coordinate deviation from the identity grid.
double stn_identity_loss(const WarpGrid& grid);
// d(stn_identity_loss)/d(grid)
WarpGrid stn_identity_loss_grad(const WarpGrid& grid);

struct StnLossReport {
  double recon = 0.0;
  double identity_reg = 0.0;
  double total = 0.0;
  double lambda_recon = 1.0;
  double lambda_id = 0.1;

  static StnLossReport make(double recon, double identity_reg, double lambda_recon,
                            double lambda_id) {
    StnLossReport r;
    r.recon = recon;
    r.identity_reg = identity_reg;
    r.lambda_recon = lambda_recon;
    r.lambda_id = lambda_id;
    r.total = lambda_recon * recon + lambda_id * identity_reg;
    return r;
  }
};

// ---------------------------------------------------------------------------
// De-pixelization losses

double reconstruction_loss(const Frame& pred, const Frame& gt);

// Sum over extractors and tap layers of mean absolute feature differences.
double perceptual_loss(const Frame& pred, const Frame& gt,
                       std::vector<FeatureExtractor*> extractors);

// Trainer-side variant on tensors; accumulates d(loss)/d(pred) into grad_pred
// when non-null. pred/gt: [N,3,H,W].
double perceptual_loss_tensor(const Tensor& pred, const Tensor& gt,
                              std::vector<FeatureExtractor*> extractors, Tensor* grad_pred);

struct AdversarialLosses {
  double adv_gen = 0.0;   // generator wants D(pix, pred) judged real
  double adv_disc = 0.0;  // 1/2 [bce(D(pix,gt),real) + bce(D(pix,pred),fake)]
};

// Value-only evaluation of both adversarial objectives (no parameter updates,
// no gradient flow between the two nets).
AdversarialLosses adversarial_losses(PatchDiscriminator& disc, const Frame& pixelated,
                                     const Frame& pred, const Frame& gt);

struct DepixLossReport {
  double recon = 0.0;
  double perceptual = 0.0;
  double adv_gen = 0.0;
  double adv_disc = 0.0;
  double lambda_r = 1.0;
  double lambda_p = 0.05;
  double lambda_adv = 0.01;

  double generator_total() const {
    return lambda_r * recon + lambda_p * perceptual + lambda_adv * adv_gen;
  }
};

}  // namespace depix
