#include <cmath>
#include <random>

#include "depix/nets.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace depix;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::mt19937_64& rng) {
  Tensor t(n, c, h, w);
  std::uniform_real_distribution<float> dist(0.f, 1.f);
  for (auto& v : t.v) v = dist(rng);
  return t;
}

bool tensor_finite(const Tensor& t) {
  for (float v : t.v) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("stn with a zero-initialized head emits the identity grid exactly") {
  std::mt19937_64 rng(7);
  for (int res : {8, 16}) {
    StnNetConfig cfg;
    cfg.input_resolution = res;
    StnNet net(cfg, 42);
    const Frame a = testutil::random_frame(res, res, rng);
    const Frame b = testutil::random_frame(res, res, rng);
    const WarpGrid grid = net.predict_grid(a, b);
    const WarpGrid id = identity_grid(8);
    REQUIRE(grid.xy.size() == id.xy.size());
    for (size_t i = 0; i < grid.xy.size(); ++i) CHECK(grid.xy[i] == id.xy[i]);
  }
}

TEST_CASE("stn forward emits an 8x8 grid for both input resolutions") {
  std::mt19937_64 rng(8);
  for (int res : {8, 16}) {
    StnNetConfig cfg;
    cfg.input_resolution = res;
    StnNet net(cfg, 1);
    const Tensor out = net.forward(random_tensor(2, 6, res, res, rng));
    CHECK(out.n == 2);
    CHECK(out.c == 2);
    CHECK(out.h == 8);
    CHECK(out.w == 8);
  }
}

TEST_CASE("stn rejects mismatched input resolution") {
  StnNetConfig cfg;
  cfg.input_resolution = 16;
  StnNet net(cfg, 1);
  const Frame a = constant_frame(8, 8, 0.5f);
  CHECK_THROWS_AS(net.predict_grid(a, a), ContractError);
  CHECK_THROWS_AS(StnNet(StnNetConfig{.input_resolution = 32}, 1), ConfigError);
}

TEST_CASE("all stn parameters receive gradient once the head is live") {
  std::mt19937_64 rng(9);
  StnNetConfig cfg;
  StnNet net(cfg, 3);
  net.randomize_head(rng);
  const Tensor x = random_tensor(2, 6, 16, 16, rng);
  Tensor y = net.forward(x);
  Tensor gout = y;
  for (auto& v : gout.v) v = 1.f;
  for (nn::Param* p : net.params()) p->zero_grad();
  net.backward(gout);
  for (nn::Param* p : net.params()) {
    double mag = 0.0;
    for (float g : p->g) mag += std::fabs(g);
    CHECK_MESSAGE(mag > 0.0, p->name);
  }
}

TEST_CASE("depix net preserves shapes for every supported stack size") {
  std::mt19937_64 rng(10);
  for (int f : {1, 5, 9, 15}) {
    DepixNetConfig cfg;
    cfg.input_channels = 3 * f;
    cfg.base_channels = 8;  // small instantiation, same topology
    DepixNet net(cfg, 5);
    const Tensor y = net.forward(random_tensor(1, 3 * f, 128, 128, rng));
    CHECK(y.n == 1);
    CHECK(y.c == 3);
    CHECK(y.h == 128);
    CHECK(y.w == 128);
    CHECK(tensor_finite(y));
    for (float v : y.v) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
  }
}

TEST_CASE("depix forward is deterministic in evaluation mode") {
  std::mt19937_64 rng(11);
  DepixNetConfig cfg;
  cfg.input_channels = 15;
  cfg.base_channels = 8;
  cfg.depth = 4;
  DepixNet net(cfg, 5);
  const Tensor x = random_tensor(1, 15, 128, 128, rng);
  const Tensor y1 = net.forward(x);
  const Tensor y2 = net.forward(x);
  CHECK(y1.v == y2.v);
}

TEST_CASE("depix net validates its config") {
  CHECK_THROWS_AS(DepixNet(DepixNetConfig{.input_channels = 7}, 1), ConfigError);
  CHECK_THROWS_AS(DepixNet(DepixNetConfig{.input_channels = 15, .depth = 9}, 1), ConfigError);
  DepixNetConfig no_skip;
  no_skip.skip_connections = false;
  CHECK_THROWS_AS(DepixNet(no_skip, 1), ConfigError);
  DepixNetConfig cfg;
  cfg.base_channels = 8;
  DepixNet net(cfg, 1);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(net.forward(random_tensor(1, 12, 128, 128, rng)), ContractError);
}

TEST_CASE("all depix parameters receive gradient from a generic loss") {
  std::mt19937_64 rng(12);
  DepixNetConfig cfg;
  cfg.input_resolution = 32;
  cfg.depth = 3;
  cfg.base_channels = 4;
  cfg.input_channels = 6;
  DepixNet net(cfg, 6);
  const Tensor x = random_tensor(2, 6, 32, 32, rng);
  const Tensor y = net.forward(x);
  Tensor gout = y;
  std::uniform_real_distribution<float> dist(-1.f, 1.f);
  for (auto& v : gout.v) v = dist(rng);
  for (nn::Param* p : net.params()) p->zero_grad();
  net.backward(gout);
  for (nn::Param* p : net.params()) {
    double mag = 0.0;
    for (float g : p->g) mag += std::fabs(g);
    CHECK_MESSAGE(mag > 0.0, p->name);
  }
}

TEST_CASE("patch discriminator map size matches the stride arithmetic oracle") {
  DiscriminatorConfig cfg;
  // hand-computed: 128 ->(4,2,1) 64 -> 32 -> 16 ->(4,1,1) 15 ->(4,1,1) 14
  CHECK(cfg.patch_map_size(128) == 14);

  PatchDiscriminator disc(cfg, 2);
  std::mt19937_64 rng(13);
  const Frame pix = testutil::random_frame(128, 128, rng);
  const Frame cand = testutil::random_frame(128, 128, rng);
  const Tensor logits = disc.score(pix, cand);
  CHECK(logits.n == 1);
  CHECK(logits.c == 1);
  CHECK(logits.h == 14);
  CHECK(logits.w == 14);
}

TEST_CASE("swapping the candidate changes values but never the map shape") {
  DiscriminatorConfig cfg;
  PatchDiscriminator disc(cfg, 2);
  std::mt19937_64 rng(14);
  const Frame pix = testutil::random_frame(128, 128, rng);
  const Frame gt = testutil::random_frame(128, 128, rng);
  const Frame fake = testutil::random_frame(128, 128, rng);
  const Tensor a = disc.score(pix, gt);
  const Tensor b = disc.score(pix, fake);
  CHECK(a.h == b.h);
  CHECK(a.w == b.w);
}

TEST_CASE("discriminator logits are finite on constant input") {
  DiscriminatorConfig cfg;
  PatchDiscriminator disc(cfg, 3);
  const Frame flat = constant_frame(128, 128, 0.5f);
  CHECK(tensor_finite(disc.score(flat, flat)));
}

TEST_CASE("discriminator parameters all receive gradient") {
  std::mt19937_64 rng(15);
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  PatchDiscriminator disc(cfg, 4);
  const Tensor x = random_tensor(2, 6, 64, 64, rng);
  const Tensor y = disc.forward(x);
  Tensor gout = y;
  for (auto& v : gout.v) v = 1.f;
  for (nn::Param* p : disc.params()) p->zero_grad();
  disc.backward(gout);
  for (nn::Param* p : disc.params()) {
    double mag = 0.0;
    for (float g : p->g) mag += std::fabs(g);
    CHECK_MESSAGE(mag > 0.0, p->name);
  }
}

TEST_CASE("network outputs stay finite for in-range inputs") {
  std::mt19937_64 rng(16);
  StnNet stn(StnNetConfig{}, 21);
  CHECK(tensor_finite(stn.forward(random_tensor(1, 6, 16, 16, rng))));
  DepixNetConfig dcfg;
  dcfg.input_resolution = 64;
  dcfg.depth = 4;
  dcfg.base_channels = 8;
  dcfg.input_channels = 15;
  DepixNet gen(dcfg, 22);
  CHECK(tensor_finite(gen.forward(random_tensor(1, 15, 64, 64, rng))));
}

TEST_CASE("checkpoint round trip restores parameters bit-identically") {
  testutil::TempDir tmp("ckpt");
  StnNetConfig cfg;
  StnNet net(cfg, 77);
  std::mt19937_64 rng(17);
  net.randomize_head(rng);
  const auto path = tmp.path() / "stn.ckpt";
  save_checkpoint(path, "stn", nlohmann::json(cfg), net.params(), {{"note", "test"}});

  StnNet restored = stn_from_checkpoint(path);
  auto a = net.params();
  auto b = restored.params();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->w == b[i]->w);
  }
}

TEST_CASE("checkpoint refuses a differently configured net") {
  testutil::TempDir tmp("ckpt_mismatch");
  StnNetConfig cfg;
  StnNet net(cfg, 77);
  const auto path = tmp.path() / "stn.ckpt";
  save_checkpoint(path, "stn", nlohmann::json(cfg), net.params());

  const Checkpoint ckpt = read_checkpoint(path);
  StnNetConfig other = cfg;
  other.base_channels = 16;
  StnNet wrong(other, 1);
  CHECK_THROWS_AS(load_params(ckpt, "stn", nlohmann::json(other), wrong.params()), ConfigError);
  CHECK_THROWS_AS(load_params(ckpt, "depix", nlohmann::json(cfg), net.params()), ConfigError);
  CHECK_THROWS_AS(depix_from_checkpoint(path), ConfigError);
}
