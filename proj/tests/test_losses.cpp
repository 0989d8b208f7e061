#include <cmath>
#include <random>

#include "depix/losses.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace depix;

TEST_CASE("stn reconstruction loss is zero for equal frames under identity") {
  std::mt19937_64 rng(1);
  const Frame a = testutil::random_frame(16, 16, rng);
  CHECK(stn_reconstruction_loss(a, a, identity_grid(8)) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("stn reconstruction loss of opposing constants is one for any grid") {
  std::mt19937_64 rng(2);
  const Frame ones = constant_frame(16, 16, 1.f);
  const Frame zeros = constant_frame(16, 16, 0.f);
  for (int i = 0; i < 5; ++i) {
    const WarpGrid g = testutil::random_grid(8, rng, 1.2);
    CHECK(stn_reconstruction_loss(ones, zeros, g) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("stn reconstruction loss with identity grid reduces to plain l1") {
  std::mt19937_64 rng(3);
  const Frame a = testutil::random_frame(16, 16, rng);
  const Frame b = testutil::random_frame(16, 16, rng);
  const double direct = l1_mean(a.rgb, b.rgb);
  CHECK(stn_reconstruction_loss(a, b, identity_grid(8)) == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("a correct translation grid beats the identity grid") {
  std::mt19937_64 rng(4);
  const int res = 16, shift = 2;
  const Frame a = testutil::random_frame(res, res, rng);
  // b = a shifted by -shift px in x with edge fill; warping b by +shift recovers a
  Frame b(res, res);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        b.at(y, x, ch) = a.at(y, std::max(0, x - shift), ch);
      }
    }
  }
  WarpGrid g = identity_grid(res);
  for (int gy = 0; gy < res; ++gy) {
    for (int gx = 0; gx < res; ++gx) g.x(gy, gx) -= 2.0 * shift / res;
  }
  const double aligned = stn_reconstruction_loss(a, b, g);
  const double unaligned = stn_reconstruction_loss(a, b, identity_grid(res));
  CHECK(aligned < unaligned);
}

TEST_CASE("stn identity loss closed forms") {
  CHECK(stn_identity_loss(identity_grid(8)) == 0.0);

  WarpGrid g = identity_grid(8);
  for (int gy = 0; gy < 8; ++gy) {
    for (int gx = 0; gx < 8; ++gx) g.x(gy, gx) += 0.1;
  }
  // x channel deviates by 0.1, y by 0 -> mean over both channels is 0.05
  CHECK(stn_identity_loss(g) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("stn identity loss matches an elementwise oracle on random grids") {
  std::mt19937_64 rng(5);
  const WarpGrid g = testutil::random_grid(8, rng);
  const WarpGrid id = identity_grid(8);
  double acc = 0.0;
  for (size_t i = 0; i < g.xy.size(); ++i) acc += std::fabs(g.xy[i] - id.xy[i]);
  acc /= static_cast<double>(g.xy.size());
  CHECK(stn_identity_loss(g) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("stn identity loss is zero iff the grid is the identity") {
  WarpGrid g = identity_grid(8);
  CHECK(stn_identity_loss(g) < 1e-9);
  g.x(3, 4) += 1e-6;
  CHECK(stn_identity_loss(g) > 1e-9);
}

TEST_CASE("stn loss report satisfies the weighted-sum invariant") {
  const StnLossReport r = StnLossReport::make(0.25, 0.1, 1.0, 0.1);
  CHECK(r.total == 1.0 * 0.25 + 0.1 * 0.1);
}

TEST_CASE("reconstruction loss closed forms and oracle") {
  std::mt19937_64 rng(6);
  const Frame a = testutil::random_frame(32, 32, rng);
  CHECK(reconstruction_loss(a, a) == 0.0);

  Frame gt = testutil::random_frame(32, 32, rng, 0.0f, 0.85f);
  Frame pred = gt;
  for (auto& v : pred.rgb) v += 0.1f;  // pre-clamp values
  CHECK(reconstruction_loss(pred, gt) == doctest::Approx(0.1).epsilon(1e-6));

  const Frame b = testutil::random_frame(32, 32, rng);
  double acc = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i) acc += std::fabs(static_cast<double>(a.rgb[i]) - b.rgb[i]);
  acc /= static_cast<double>(a.rgb.size());
  CHECK(reconstruction_loss(a, b) == doctest::Approx(acc).epsilon(1e-12));
  CHECK(reconstruction_loss(a, b) == reconstruction_loss(b, a));

  const Frame small = constant_frame(8, 8, 0.f);
  CHECK_THROWS_AS(reconstruction_loss(a, small), ContractError);
}

TEST_CASE("perceptual loss vanishes on identical frames") {
  std::mt19937_64 rng(7);
  const Frame a = testutil::random_frame(32, 32, rng);
  FeatureExtractor vgg(FeatureExtractorSpec::vgg19_like(0.125), 99);
  FeatureExtractor ident(FeatureExtractorSpec::identity(), 0);
  CHECK(perceptual_loss(a, a, {&vgg}) == 0.0);
  CHECK(perceptual_loss(a, a, {&ident}) == 0.0);
  CHECK(perceptual_loss(a, a, {&vgg, &ident}) == 0.0);
}

TEST_CASE("perceptual loss with the identity extractor reduces to reconstruction loss") {
  std::mt19937_64 rng(8);
  const Frame a = testutil::random_frame(32, 32, rng);
  const Frame b = testutil::random_frame(32, 32, rng);
  FeatureExtractor ident(FeatureExtractorSpec::identity(), 0);
  CHECK(perceptual_loss(a, b, {&ident}) ==
        doctest::Approx(reconstruction_loss(a, b)).epsilon(1e-12));
}

TEST_CASE("perceptual loss matches a straight-line tap-and-l1 oracle") {
  std::mt19937_64 rng(9);
  const Frame a = testutil::random_frame(32, 32, rng);
  const Frame b = testutil::random_frame(32, 32, rng);
  FeatureExtractor fx(FeatureExtractorSpec::vggface_like(0.125), 1234);

  // oracle: walk the taps by hand and accumulate mean-abs differences
  auto ta = fx.forward_taps(frame_to_tensor(a));
  auto tb = fx.forward_taps(frame_to_tensor(b));
  REQUIRE(ta.size() == 5);
  double expect = 0.0;
  for (size_t k = 0; k < ta.size(); ++k) {
    double acc = 0.0;
    for (size_t i = 0; i < ta[k].v.size(); ++i) {
      acc += std::fabs(static_cast<double>(ta[k].v[i]) - tb[k].v[i]);
    }
    expect += acc / static_cast<double>(ta[k].v.size());
  }
  CHECK(perceptual_loss(a, b, {&fx}) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(perceptual_loss(a, b, {&fx}) == perceptual_loss(b, a, {&fx}));
}

TEST_CASE("perceptual loss gradient matches finite differences") {
  std::mt19937_64 rng(10);
  FeatureExtractor fx(FeatureExtractorSpec::vgg19_like(0.0625), 7);
  Tensor pred(1, 3, 16, 16), gt(1, 3, 16, 16);
  std::uniform_real_distribution<float> dist(0.1f, 0.9f);
  for (auto& v : pred.v) v = dist(rng);
  for (auto& v : gt.v) v = dist(rng);

  Tensor grad(1, 3, 16, 16);
  perceptual_loss_tensor(pred, gt, {&fx}, &grad);
  const double eps = 1e-3;
  std::uniform_int_distribution<size_t> pick(0, pred.v.size() - 1);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const size_t i = pick(rng);
    Tensor pp = pred, pm = pred;
    pp.v[i] += static_cast<float>(eps);
    pm.v[i] -= static_cast<float>(eps);
    const double fd = (perceptual_loss_tensor(pp, gt, {&fx}, nullptr) -
                       perceptual_loss_tensor(pm, gt, {&fx}, nullptr)) /
                      (2 * eps);
    const double an = grad.v[i];
    if (std::fabs(fd) < 1e-4 && std::fabs(an) < 1e-4) continue;  // flat region
    const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-3});
    CHECK(rel < 5e-2);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("extractor taps are deterministic for a fixed seed") {
  std::mt19937_64 rng(11);
  const Frame a = testutil::random_frame(32, 32, rng);
  FeatureExtractor f1(FeatureExtractorSpec::vgg19_like(0.125), 42);
  FeatureExtractor f2(FeatureExtractorSpec::vgg19_like(0.125), 42);
  auto t1 = f1.forward_taps(frame_to_tensor(a));
  auto t2 = f2.forward_taps(frame_to_tensor(a));
  REQUIRE(t1.size() == t2.size());
  for (size_t k = 0; k < t1.size(); ++k) CHECK(t1[k].v == t2[k].v);
}

TEST_CASE("bce with logits closed forms") {
  Tensor logits(1, 1, 4, 4);  // all zero
  CHECK(bce_with_logits_mean(logits, 1.f) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_with_logits_mean(logits, 0.f) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // perfect discriminator: large correctly-signed logits
  Tensor big(1, 1, 4, 4);
  big.fill(30.f);
  CHECK(bce_with_logits_mean(big, 1.f) < 1e-9);   // real judged real
  Tensor neg(1, 1, 4, 4);
  neg.fill(-30.f);
  CHECK(bce_with_logits_mean(neg, 0.f) < 1e-9);   // fake judged fake
  CHECK(bce_with_logits_mean(neg, 1.f) > 10.0);   // generator loss explodes
}

TEST_CASE("patch map mean equals per-patch sum divided by count") {
  std::mt19937_64 rng(12);
  Tensor logits(2, 1, 5, 5);
  std::uniform_real_distribution<float> dist(-3.f, 3.f);
  for (auto& v : logits.v) v = dist(rng);
  double acc = 0.0;
  for (float lf : logits.v) {
    const double l = lf;
    acc += std::max(0.0, l) - l * 1.0 + std::log1p(std::exp(-std::fabs(l)));
  }
  CHECK(bce_with_logits_mean(logits, 1.f) == acc / static_cast<double>(logits.size()));
}

TEST_CASE("adversarial losses with an all-zero-logit discriminator equal ln 2") {
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  PatchDiscriminator disc(cfg, 5);
  for (nn::Param* p : disc.params()) {
    if (p->name.rfind("disc.out", 0) == 0) std::fill(p->w.begin(), p->w.end(), 0.f);
  }
  std::mt19937_64 rng(13);
  const Frame pix = testutil::random_frame(64, 64, rng);
  const Frame pred = testutil::random_frame(64, 64, rng);
  const Frame gt = testutil::random_frame(64, 64, rng);
  const AdversarialLosses adv = adversarial_losses(disc, pix, pred, gt);
  CHECK(adv.adv_disc == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(adv.adv_gen == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("depix loss report satisfies the weighted-sum invariant") {
  DepixLossReport r;
  r.recon = 0.2;
  r.perceptual = 1.5;
  r.adv_gen = 0.7;
  r.lambda_r = 1.0;
  r.lambda_p = 0.05;
  r.lambda_adv = 0.01;
  CHECK(r.generator_total() == 1.0 * 0.2 + 0.05 * 1.5 + 0.01 * 0.7);
}
