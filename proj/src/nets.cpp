#include "depix/nets.hpp"

#include <algorithm>
#include <cmath>

namespace depix {

namespace {
constexpr int kChannelCap = 512;

int level_channels(int base, int level) {
  const long long c = static_cast<long long>(base) << level;
  return static_cast<int>(std::min<long long>(c, kChannelCap));
}
}  // namespace

// ---------------------------------------------------------------------------
// Config validation + JSON

void StnNetConfig::validate() const {
  if (input_resolution != 8 && input_resolution != 16) {
    throw ConfigError("StnNetConfig: input_resolution must be 8 or 16");
  }
  if (input_channels != 6) {
    throw ConfigError("StnNetConfig: input_channels must be 6 (two RGB frames)");
  }
  if (grid_resolution != 8) {
    throw ConfigError("StnNetConfig: grid_resolution must be 8");
  }
  if (base_channels < 1) {
    throw ConfigError("StnNetConfig: base_channels must be positive");
  }
}

void DepixNetConfig::validate() const {
  if (input_channels <= 0 || input_channels % 3 != 0) {
    throw ConfigError("DepixNetConfig: input_channels must be a positive multiple of 3");
  }
  if (output_channels != 3) {
    throw ConfigError("DepixNetConfig: output is a single RGB frame");
  }
  if (depth < 1 || base_channels < 1) {
    throw ConfigError("DepixNetConfig: depth and base_channels must be positive");
  }
  if (input_resolution % (1 << depth) != 0 || input_resolution >> depth < 2) {
    throw ConfigError("DepixNetConfig: input_resolution must be divisible by 2^depth with >=2 px left");
  }
  if (!skip_connections) {
    throw ConfigError("DepixNetConfig: skip_connections is always true for this architecture");
  }
}

void DiscriminatorConfig::validate() const {
  if (input_channels != 6) {
    throw ConfigError("DiscriminatorConfig: input_channels must be 6");
  }
  if (num_layers < 1 || base_channels < 1) {
    throw ConfigError("DiscriminatorConfig: num_layers and base_channels must be positive");
  }
}

int DiscriminatorConfig::patch_map_size(int input_resolution) const {
  int s = input_resolution;
  for (int i = 0; i < num_layers; ++i) s = nn::Conv2d::out_dim(s, 4, 2, 1);
  s = nn::Conv2d::out_dim(s, 4, 1, 1);
  s = nn::Conv2d::out_dim(s, 4, 1, 1);
  return s;
}

void to_json(nlohmann::json& j, const StnNetConfig& c) {
  j = {{"input_resolution", c.input_resolution},
       {"input_channels", c.input_channels},
       {"grid_resolution", c.grid_resolution},
       {"base_channels", c.base_channels}};
}
void from_json(const nlohmann::json& j, StnNetConfig& c) {
  j.at("input_resolution").get_to(c.input_resolution);
  j.at("input_channels").get_to(c.input_channels);
  j.at("grid_resolution").get_to(c.grid_resolution);
  j.at("base_channels").get_to(c.base_channels);
}
void to_json(nlohmann::json& j, const DepixNetConfig& c) {
  j = {{"input_resolution", c.input_resolution}, {"input_channels", c.input_channels},
       {"output_channels", c.output_channels},   {"depth", c.depth},
       {"base_channels", c.base_channels},       {"skip_connections", c.skip_connections}};
}
void from_json(const nlohmann::json& j, DepixNetConfig& c) {
  j.at("input_resolution").get_to(c.input_resolution);
  j.at("input_channels").get_to(c.input_channels);
  j.at("output_channels").get_to(c.output_channels);
  j.at("depth").get_to(c.depth);
  j.at("base_channels").get_to(c.base_channels);
  j.at("skip_connections").get_to(c.skip_connections);
}
void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"input_channels", c.input_channels},
       {"num_layers", c.num_layers},
       {"base_channels", c.base_channels}};
}
void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  j.at("input_channels").get_to(c.input_channels);
  j.at("num_layers").get_to(c.num_layers);
  j.at("base_channels").get_to(c.base_channels);
}

// ---------------------------------------------------------------------------
// StnNet

StnNet::StnNet(StnNetConfig cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int b = cfg_.base_channels;
  two_downs_ = cfg_.input_resolution == 16;

  e0_conv_ = std::make_unique<nn::Conv2d>(6, b, 3, 1, 1, "stn.e0");
  e0_norm_ = std::make_unique<nn::InstanceNorm2d>(b, "stn.e0");
  d1_conv_ = std::make_unique<nn::Conv2d>(b, 2 * b, 3, 2, 1, "stn.d1");
  d1_norm_ = std::make_unique<nn::InstanceNorm2d>(2 * b, "stn.d1");
  int bott_ch = 2 * b;
  if (two_downs_) {
    d2_conv_ = std::make_unique<nn::Conv2d>(2 * b, 4 * b, 3, 2, 1, "stn.d2");
    d2_norm_ = std::make_unique<nn::InstanceNorm2d>(4 * b, "stn.d2");
    bott_ch = 4 * b;
  }
  bott_conv_ = std::make_unique<nn::Conv2d>(bott_ch, bott_ch, 3, 1, 1, "stn.bott");
  bott_norm_ = std::make_unique<nn::InstanceNorm2d>(bott_ch, "stn.bott");
  // skip comes from the encoder feature at grid resolution: d1 (16-input) or e0 (8-input)
  const int skip_ch = two_downs_ ? 2 * b : b;
  u1_conv_ = std::make_unique<nn::Conv2d>(bott_ch + skip_ch, 2 * b, 3, 1, 1, "stn.u1");
  u1_norm_ = std::make_unique<nn::InstanceNorm2d>(2 * b, "stn.u1");
  head_ = std::make_unique<nn::Conv2d>(2 * b, 2, 3, 1, 1, "stn.head");

  e0_conv_->init_he(rng);
  d1_conv_->init_he(rng);
  if (d2_conv_) d2_conv_->init_he(rng);
  bott_conv_->init_he(rng);
  u1_conv_->init_he(rng);
  head_->init_zero();  // start at the identity warp
}

void StnNet::randomize_head(std::mt19937_64& rng) { head_->init_he(rng); }

Tensor StnNet::forward(const Tensor& x) {
  if (x.c != 6 || x.h != cfg_.input_resolution || x.w != cfg_.input_resolution) {
    throw ContractError("StnNet::forward: expected [N,6," + std::to_string(cfg_.input_resolution) +
                        "," + std::to_string(cfg_.input_resolution) + "], got " + x.shape_str());
  }
  Tensor t = e0_act_.forward(e0_norm_->forward(e0_conv_->forward(x)));
  if (two_downs_) {
    Tensor d1 = d1_act_.forward(d1_norm_->forward(d1_conv_->forward(t)));
    skip_ = d1;
    t = d2_act_.forward(d2_norm_->forward(d2_conv_->forward(d1)));
  } else {
    skip_ = t;
    t = d1_act_.forward(d1_norm_->forward(d1_conv_->forward(t)));
  }
  t = bott_act_.forward(bott_norm_->forward(bott_conv_->forward(t)));
  t = up_.forward(t);
  t = nn::concat_channels(t, skip_);
  t = u1_act_.forward(u1_norm_->forward(u1_conv_->forward(t)));
  return head_->forward(t);
}

Tensor StnNet::backward(const Tensor& grad_residual, bool accum) {
  Tensor g = head_->backward(grad_residual, accum);
  g = u1_conv_->backward(u1_norm_->backward(u1_act_.backward(g, accum), accum), accum);
  Tensor g_up, g_skip;
  nn::split_channels(g, g.c - skip_.c, &g_up, &g_skip);
  g = up_.backward(g_up, accum);
  g = bott_conv_->backward(bott_norm_->backward(bott_act_.backward(g, accum), accum), accum);
  if (two_downs_) {
    g = d2_conv_->backward(d2_norm_->backward(d2_act_.backward(g, accum), accum), accum);
    // d1 output also fed the skip
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += g_skip.v[i];
    g = d1_conv_->backward(d1_norm_->backward(d1_act_.backward(g, accum), accum), accum);
  } else {
    g = d1_conv_->backward(d1_norm_->backward(d1_act_.backward(g, accum), accum), accum);
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += g_skip.v[i];
  }
  return e0_conv_->backward(e0_norm_->backward(e0_act_.backward(g, accum), accum), accum);
}

std::vector<nn::Param*> StnNet::params() {
  std::vector<nn::Param*> out;
  for (nn::Layer* l : std::initializer_list<nn::Layer*>{
           e0_conv_.get(), e0_norm_.get(), d1_conv_.get(), d1_norm_.get(), d2_conv_.get(),
           d2_norm_.get(), bott_conv_.get(), bott_norm_.get(), u1_conv_.get(), u1_norm_.get(),
           head_.get()}) {
    if (!l) continue;
    for (nn::Param* p : l->params()) out.push_back(p);
  }
  return out;
}

Tensor pack_pair(const Frame& target, const Frame& source) {
  if (!target.same_shape(source)) {
    throw ContractError("pack_pair: frame resolutions differ");
  }
  Tensor x(1, 6, target.height, target.width);
  frame_into_tensor(target, x, 0, 0);
  frame_into_tensor(source, x, 0, 3);
  return x;
}

WarpGrid StnNet::predict_grid(const Frame& target, const Frame& source) {
  if (target.height != cfg_.input_resolution || target.width != cfg_.input_resolution) {
    throw ContractError("StnNet::predict_grid: frames must be at input resolution " +
                        std::to_string(cfg_.input_resolution));
  }
  const Tensor res = forward(pack_pair(target, source));
  WarpGrid grid = identity_grid(cfg_.grid_resolution);
  const int g = cfg_.grid_resolution;
  for (int gy = 0; gy < g; ++gy) {
    for (int gx = 0; gx < g; ++gx) {
      grid.x(gy, gx) += res.at(0, 0, gy, gx);
      grid.y(gy, gx) += res.at(0, 1, gy, gx);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// DepixNet

DepixNet::DepixNet(DepixNetConfig cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int depth = cfg_.depth;
  enc_.resize(depth);
  int prev_ch = cfg_.input_channels;
  for (int k = 0; k < depth; ++k) {
    const int ch = level_channels(cfg_.base_channels, k);
    enc_[k].conv = std::make_unique<nn::Conv2d>(prev_ch, ch, 3, 2, 1, "depix.enc" + std::to_string(k));
    enc_[k].norm = std::make_unique<nn::InstanceNorm2d>(ch, "depix.enc" + std::to_string(k));
    enc_[k].conv->init_he(rng);
    prev_ch = ch;
  }
  bott_conv_ = std::make_unique<nn::Conv2d>(prev_ch, prev_ch, 3, 1, 1, "depix.bott");
  bott_norm_ = std::make_unique<nn::InstanceNorm2d>(prev_ch, "depix.bott");
  bott_conv_->init_he(rng);

  dec_.resize(depth);
  int cur_ch = prev_ch;
  for (int k = depth - 1; k >= 0; --k) {
    DecLevel& lvl = dec_[depth - 1 - k];
    lvl.skip_channels = k >= 1 ? level_channels(cfg_.base_channels, k - 1) : cfg_.input_channels;
    const int out_ch = k >= 1 ? level_channels(cfg_.base_channels, k - 1) : cfg_.base_channels;
    lvl.conv = std::make_unique<nn::Conv2d>(cur_ch + lvl.skip_channels, out_ch, 3, 1, 1,
                                            "depix.dec" + std::to_string(k));
    lvl.norm = std::make_unique<nn::InstanceNorm2d>(out_ch, "depix.dec" + std::to_string(k));
    lvl.conv->init_he(rng);
    cur_ch = out_ch;
  }
  head_ = std::make_unique<nn::Conv2d>(cur_ch, cfg_.output_channels, 3, 1, 1, "depix.head");
  head_->init_he(rng);
}

Tensor DepixNet::forward(const Tensor& x) {
  if (x.c != cfg_.input_channels || x.h != cfg_.input_resolution || x.w != cfg_.input_resolution) {
    throw ContractError("DepixNet::forward: expected [N," + std::to_string(cfg_.input_channels) +
                        "," + std::to_string(cfg_.input_resolution) + "," +
                        std::to_string(cfg_.input_resolution) + "], got " + x.shape_str());
  }
  input_ = x;
  Tensor t = x;
  for (auto& lvl : enc_) {
    t = lvl.act.forward(lvl.norm->forward(lvl.conv->forward(t)));
    lvl.out = t;
  }
  t = bott_act_.forward(bott_norm_->forward(bott_conv_->forward(t)));
  for (size_t i = 0; i < dec_.size(); ++i) {
    DecLevel& lvl = dec_[i];
    const int enc_level = static_cast<int>(dec_.size()) - 2 - static_cast<int>(i);
    const Tensor& skip = enc_level >= 0 ? enc_[enc_level].out : input_;
    t = lvl.up.forward(t);
    t = nn::concat_channels(t, skip);
    t = lvl.act.forward(lvl.norm->forward(lvl.conv->forward(t)));
  }
  return out_act_.forward(head_->forward(t));
}

Tensor DepixNet::backward(const Tensor& grad_out, bool accum) {
  Tensor g = head_->backward(out_act_.backward(grad_out, accum), accum);
  std::vector<Tensor> skip_grads(dec_.size());
  for (int i = static_cast<int>(dec_.size()) - 1; i >= 0; --i) {
    DecLevel& lvl = dec_[i];
    g = lvl.conv->backward(lvl.norm->backward(lvl.act.backward(g, accum), accum), accum);
    Tensor g_up;
    nn::split_channels(g, g.c - lvl.skip_channels, &g_up, &skip_grads[i]);
    g = lvl.up.backward(g_up, accum);
  }
  g = bott_conv_->backward(bott_norm_->backward(bott_act_.backward(g, accum), accum), accum);
  for (int k = static_cast<int>(enc_.size()) - 1; k >= 0; --k) {
    // decoder level (depth-2-k) consumed enc_[k].out as its skip
    const int dec_idx = static_cast<int>(dec_.size()) - 2 - k;
    if (dec_idx >= 0) {
      const Tensor& sg = skip_grads[dec_idx];
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += sg.v[i];
    }
    g = enc_[k].conv->backward(enc_[k].norm->backward(enc_[k].act.backward(g, accum), accum), accum);
  }
  // the raw input fed the last decoder concat
  const Tensor& sg = skip_grads.back();
  for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += sg.v[i];
  return g;
}

Frame DepixNet::infer(const Tensor& stack) {
  const Tensor y = forward(stack);
  return tensor_to_frame(y, 0);
}

std::vector<nn::Param*> DepixNet::params() {
  std::vector<nn::Param*> out;
  auto add = [&out](nn::Layer* l) {
    for (nn::Param* p : l->params()) out.push_back(p);
  };
  for (auto& lvl : enc_) {
    add(lvl.conv.get());
    add(lvl.norm.get());
  }
  add(bott_conv_.get());
  add(bott_norm_.get());
  for (auto& lvl : dec_) {
    add(lvl.conv.get());
    add(lvl.norm.get());
  }
  add(head_.get());
  return out;
}

// ---------------------------------------------------------------------------
// PatchDiscriminator

PatchDiscriminator::PatchDiscriminator(DiscriminatorConfig cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  int prev_ch = cfg_.input_channels;
  for (int i = 0; i < cfg_.num_layers; ++i) {
    Block b;
    const int ch = level_channels(cfg_.base_channels, i);
    b.conv = std::make_unique<nn::Conv2d>(prev_ch, ch, 4, 2, 1, "disc.s2_" + std::to_string(i));
    if (i > 0) b.norm = std::make_unique<nn::InstanceNorm2d>(ch, "disc.s2_" + std::to_string(i));
    b.conv->init_he(rng);
    blocks_.push_back(std::move(b));
    prev_ch = ch;
  }
  {
    Block b;
    const int ch = level_channels(cfg_.base_channels, cfg_.num_layers);
    b.conv = std::make_unique<nn::Conv2d>(prev_ch, ch, 4, 1, 1, "disc.s1");
    b.norm = std::make_unique<nn::InstanceNorm2d>(ch, "disc.s1");
    b.conv->init_he(rng);
    blocks_.push_back(std::move(b));
    prev_ch = ch;
  }
  {
    Block b;
    b.conv = std::make_unique<nn::Conv2d>(prev_ch, 1, 4, 1, 1, "disc.out");
    b.conv->init_he(rng);
    b.has_act = false;
    blocks_.push_back(std::move(b));
  }
}

Tensor PatchDiscriminator::forward(const Tensor& x) {
  if (x.c != cfg_.input_channels) {
    throw ContractError("PatchDiscriminator::forward: expected " +
                        std::to_string(cfg_.input_channels) + " channels, got " + x.shape_str());
  }
  Tensor t = x;
  for (auto& b : blocks_) {
    t = b.conv->forward(t);
    if (b.norm) t = b.norm->forward(t);
    if (b.has_act) t = b.act.forward(t);
  }
  return t;
}

Tensor PatchDiscriminator::backward(const Tensor& grad_out, bool accum) {
  Tensor g = grad_out;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    if (it->has_act) g = it->act.backward(g, accum);
    if (it->norm) g = it->norm->backward(g, accum);
    g = it->conv->backward(g, accum);
  }
  return g;
}

Tensor PatchDiscriminator::score(const Frame& pixelated, const Frame& candidate) {
  if (!pixelated.same_shape(candidate)) {
    throw ContractError("PatchDiscriminator::score: frame resolutions differ");
  }
  Tensor x(1, 6, pixelated.height, pixelated.width);
  frame_into_tensor(pixelated, x, 0, 0);
  frame_into_tensor(candidate, x, 0, 3);
  return forward(x);
}

std::vector<nn::Param*> PatchDiscriminator::params() {
  std::vector<nn::Param*> out;
  for (auto& b : blocks_) {
    for (nn::Param* p : b.conv->params()) out.push_back(p);
    if (b.norm) {
      for (nn::Param* p : b.norm->params()) out.push_back(p);
    }
  }
  return out;
}

}  // namespace depix
