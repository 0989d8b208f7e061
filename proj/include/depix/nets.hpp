#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "depix/frame.hpp"
#include "depix/nn.hpp"
#include "depix/warp.hpp"

#include "json.hpp"

namespace depix {

// ---------------------------------------------------------------------------
// Configs

struct StnNetConfig {
  int input_resolution = 16;  // 8 or 16
  int input_channels = 6;     // two RGB frames concatenated
  int grid_resolution = 8;
  int base_channels = 32;

  void validate() const;
  bool operator==(const StnNetConfig&) const = default;
};

struct DepixNetConfig {
  int input_resolution = 128;
  int input_channels = 15;  // 3 * F
  int output_channels = 3;
  int depth = 5;  // stride-2 encoder levels
  int base_channels = 64;
  bool skip_connections = true;

  void validate() const;
  bool operator==(const DepixNetConfig&) const = default;
};

struct DiscriminatorConfig {
  int input_channels = 6;  // pixelated frame + candidate frame
  int num_layers = 3;      // stride-2 layers
  int base_channels = 64;

  void validate() const;
  bool operator==(const DiscriminatorConfig&) const = default;

  // Spatial extent of the patch logit map for a square input.
  int patch_map_size(int input_resolution) const;
};

void to_json(nlohmann::json& j, const StnNetConfig& c);
void from_json(const nlohmann::json& j, StnNetConfig& c);
void to_json(nlohmann::json& j, const DepixNetConfig& c);
void from_json(const nlohmann::json& j, DepixNetConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

// ---------------------------------------------------------------------------
// Alignment network. Predicts a free-form warp grid for an ordered frame pair
// (target, source); the head is a residual on the identity grid, so a
// zero-initialized head emits the identity warp exactly.

class StnNet {
public:
  StnNet(StnNetConfig cfg, uint64_t seed);

  // x: [N, 6, R, R] -> residual grid [N, 2, G, G], channel 0 = x, 1 = y.
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_residual, bool accumulate_param_grads = true);

  // Frame-pair entry point: grid warping `source` toward `target`.
  WarpGrid predict_grid(const Frame& target, const Frame& source);

  std::vector<nn::Param*> params();
  const StnNetConfig& config() const { return cfg_; }

  // Re-randomizes the zero-initialized head (test hook for gradient checks).
  void randomize_head(std::mt19937_64& rng);

private:
  StnNetConfig cfg_;
  // encoder: e0 at input res, then stride-2 blocks down to 4 px
  std::unique_ptr<nn::Conv2d> e0_conv_, d1_conv_, d2_conv_, bott_conv_, u1_conv_, head_;
  std::unique_ptr<nn::InstanceNorm2d> e0_norm_, d1_norm_, d2_norm_, bott_norm_, u1_norm_;
  nn::LeakyReLU e0_act_{0.2f}, d1_act_{0.2f}, d2_act_{0.2f}, bott_act_{0.2f};
  nn::ReLU u1_act_;
  nn::NearestUpsample2x up_;
  bool two_downs_ = true;
  Tensor skip_;  // encoder feature at grid resolution
};

// Packs an ordered (target, source) frame pair into a [1,6,R,R] tensor.
Tensor pack_pair(const Frame& target, const Frame& source);

// ---------------------------------------------------------------------------
// De-pixelization network: U-Net over the aligned HR frame stack, sigmoid
// output so predictions live in [0,1].

class DepixNet {
public:
  DepixNet(DepixNetConfig cfg, uint64_t seed);

  // x: [N, 3F, R, R] -> [N, 3, R, R]
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads = true);

  Frame infer(const Tensor& stack);  // single-sample convenience, eval mode

  std::vector<nn::Param*> params();
  const DepixNetConfig& config() const { return cfg_; }

private:
  DepixNetConfig cfg_;
  struct EncLevel {
    std::unique_ptr<nn::Conv2d> conv;
    std::unique_ptr<nn::InstanceNorm2d> norm;
    nn::LeakyReLU act{0.2f};
    Tensor out;
  };
  struct DecLevel {
    nn::NearestUpsample2x up;
    std::unique_ptr<nn::Conv2d> conv;
    std::unique_ptr<nn::InstanceNorm2d> norm;
    nn::ReLU act;
    int skip_channels = 0;
  };
  std::vector<EncLevel> enc_;
  std::unique_ptr<nn::Conv2d> bott_conv_;
  std::unique_ptr<nn::InstanceNorm2d> bott_norm_;
  nn::LeakyReLU bott_act_{0.2f};
  std::vector<DecLevel> dec_;  // ordered low-res -> high-res
  std::unique_ptr<nn::Conv2d> head_;
  nn::Sigmoid out_act_;
  Tensor input_;  // kept for the full-resolution skip
};

// ---------------------------------------------------------------------------
// PatchGAN discriminator: emits a 2-D map of per-patch logits.

class PatchDiscriminator {
public:
  PatchDiscriminator(DiscriminatorConfig cfg, uint64_t seed);

  // x: [N, 6, R, R] -> [N, 1, P, P]
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool accumulate_param_grads = true);

  // Frame-level entry point matching the conditioning contract.
  Tensor score(const Frame& pixelated, const Frame& candidate);

  std::vector<nn::Param*> params();
  const DiscriminatorConfig& config() const { return cfg_; }

private:
  DiscriminatorConfig cfg_;
  struct Block {
    std::unique_ptr<nn::Conv2d> conv;
    std::unique_ptr<nn::InstanceNorm2d> norm;  // absent on first and last block
    nn::LeakyReLU act{0.2f};
    bool has_act = true;
  };
  std::vector<Block> blocks_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned single-file archives of config + named parameters.

struct Checkpoint {
  std::string kind;
  nlohmann::json config;
  nlohmann::json meta;
  std::vector<std::pair<std::string, std::vector<float>>> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& config, const std::vector<nn::Param*>& params,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Loads parameters into an already-constructed net; kind or config mismatch is
// a hard ConfigError.
void load_params(const Checkpoint& ckpt, const std::string& kind, const nlohmann::json& config,
                 std::vector<nn::Param*> params);

StnNet stn_from_checkpoint(const std::filesystem::path& path);
DepixNet depix_from_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a over the checkpoint file bytes; keys the stack cache.
uint64_t checkpoint_digest(const std::filesystem::path& path);

}  // namespace depix
