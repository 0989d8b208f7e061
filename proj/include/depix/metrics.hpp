#pragma once

#include <span>
#include <vector>

#include "depix/features.hpp"
#include "depix/frame.hpp"

namespace depix {

enum class MetricScope { kFrame, kClip, kDataset };

struct MetricsRecord {
  double psnr = 0.0;    // dB
  double ssim = 0.0;    // [-1, 1]
  double id_sim = 0.0;  // [-1, 1]
  MetricScope scope = MetricScope::kFrame;
  int count = 1;
};

// Peak signal-to-noise ratio with peak 1.0; identical frames return the
// documented 100 dB cap.
double psnr(const Frame& pred, const Frame& gt);

// Mean local SSIM on ITU-R 601 luminance, 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, L=1, valid-window sliding.
double ssim(const Frame& pred, const Frame& gt);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Cosine similarity of flattened features from the extractor's deepest tap.
double identity_similarity(const Frame& pred, const Frame& gt, FeatureExtractor& extractor);

MetricsRecord frame_metrics(const Frame& pred, const Frame& gt, FeatureExtractor& extractor);

// Arithmetic mean of per-frame records.
MetricsRecord aggregate(const std::vector<MetricsRecord>& records, MetricScope scope);

}  // namespace depix
