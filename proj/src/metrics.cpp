#include "depix/metrics.hpp"

#include <cmath>

namespace depix {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_1d() {
  std::vector<double> w(kWindow);
  const int half = kWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - half;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Valid-mode separable filtering; output is (h-10) x (w-10).
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& k) {
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> horiz(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * img[static_cast<size_t>(y) * w + x + i];
      horiz[static_cast<size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * horiz[static_cast<size_t>(y + i) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

std::vector<double> luminance(const Frame& f) {
  std::vector<double> y(static_cast<size_t>(f.height) * f.width);
  for (int i = 0; i < f.height * f.width; ++i) {
    const float* px = f.rgb.data() + static_cast<size_t>(i) * 3;
    y[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return y;
}

void check_pair(const Frame& pred, const Frame& gt, const char* what) {
  if (!pred.same_shape(gt)) {
    throw ContractError(std::string(what) + ": frame shapes differ");
  }
}

}  // namespace

double psnr(const Frame& pred, const Frame& gt) {
  check_pair(pred, gt, "psnr");
  for (float v : pred.rgb) {
    if (v < -1e-6f || v > 1.f + 1e-6f) throw InvalidInputError("psnr: values outside [0,1]");
  }
  double mse = 0.0;
  for (size_t i = 0; i < pred.rgb.size(); ++i) {
    const double d = static_cast<double>(pred.rgb[i]) - gt.rgb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.rgb.size());
  if (mse == 0.0) return 100.0;  // zero-MSE cap
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Frame& pred, const Frame& gt) {
  check_pair(pred, gt, "ssim");
  if (pred.height < kWindow || pred.width < kWindow) {
    throw InvalidInputError("ssim: frames smaller than the 11x11 window");
  }
  static const std::vector<double> window = gaussian_1d();
  const int h = pred.height, w = pred.width;
  const std::vector<double> x = luminance(pred);
  const std::vector<double> y = luminance(gt);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const std::vector<double> mx = filter_valid(x, h, w, window);
  const std::vector<double> my = filter_valid(y, h, w, window);
  const std::vector<double> mxx = filter_valid(xx, h, w, window);
  const std::vector<double> myy = filter_valid(yy, h, w, window);
  const std::vector<double> mxy = filter_valid(xy, h, w, window);

  const double c1 = kK1 * kK1;  // L = 1
  const double c2 = kK2 * kK2;
  double total = 0.0;
  for (size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cov = mxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ContractError("cosine_similarity: size mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("cosine_similarity: zero-norm feature vector, similarity undefined");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double identity_similarity(const Frame& pred, const Frame& gt, FeatureExtractor& extractor) {
  check_pair(pred, gt, "identity_similarity");
  // deepest tap carries the identity-level semantics
  const Tensor fp = extractor.forward_taps(frame_to_tensor(pred)).back();
  const Tensor fg = extractor.forward_taps(frame_to_tensor(gt)).back();
  return cosine_similarity(fp.v, fg.v);
}

MetricsRecord frame_metrics(const Frame& pred, const Frame& gt, FeatureExtractor& extractor) {
  MetricsRecord r;
  r.psnr = psnr(pred, gt);
  r.ssim = ssim(pred, gt);
  r.id_sim = identity_similarity(pred, gt, extractor);
  r.scope = MetricScope::kFrame;
  r.count = 1;
  return r;
}

MetricsRecord aggregate(const std::vector<MetricsRecord>& records, MetricScope scope) {
  if (records.empty()) {
    throw InvalidInputError("aggregate: no records");
  }
  MetricsRecord out;
  out.scope = scope;
  out.count = 0;
  for (const auto& r : records) {
    out.psnr += r.psnr * r.count;
    out.ssim += r.ssim * r.count;
    out.id_sim += r.id_sim * r.count;
    out.count += r.count;
  }
  out.psnr /= out.count;
  out.ssim /= out.count;
  out.id_sim /= out.count;
  return out;
}

}  // namespace depix
