#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "depix/frame.hpp"
#include "depix/nn.hpp"

#include "json.hpp"

namespace depix {

enum class FeatOp { kConv, kRelu, kPool, kIdentity };

struct FeatureLayerSpec {
  FeatOp op = FeatOp::kIdentity;
  int out_channels = 0;  // conv only
};

// Layer sequence + tap indices of a frozen feature network. `tap_layers[i]`
// designates the output of layers[tap_layers[i]] as feature map i.
struct FeatureExtractorSpec {
  std::string name;
  std::vector<FeatureLayerSpec> layers;
  std::vector<int> tap_layers;

  // Five-tap conv stacks mirroring the standard 19- and 16-layer feature
  // hierarchies (taps after the first activation of each scale). width_scale
  // shrinks channel widths for desk-scale runs.
  static FeatureExtractorSpec vgg19_like(double width_scale = 1.0);
  static FeatureExtractorSpec vggface_like(double width_scale = 1.0);
  static FeatureExtractorSpec identity();
};

void to_json(nlohmann::json& j, const FeatureExtractorSpec& s);
void from_json(const nlohmann::json& j, FeatureExtractorSpec& s);

// Frozen feature network. Weights come either from a pretrained asset on disk
// or, when none is available, from a fixed-seed random initialization with the
// same tap structure (the substitute is flagged by name()).
class FeatureExtractor {
public:
  FeatureExtractor(FeatureExtractorSpec spec, uint64_t seed);

  static FeatureExtractor from_checkpoint(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::string& name() const { return spec_.name; }
  const std::vector<int>& tap_layers() const { return spec_.tap_layers; }
  const FeatureExtractorSpec& spec() const { return spec_; }

  // Tap outputs, in tap_layers order. x: [N,3,H,W].
  std::vector<Tensor> forward_taps(const Tensor& x);

  // d(loss)/d(input) given d(loss)/d(tap_i); parameters stay frozen.
  Tensor backward_taps(const std::vector<Tensor>& tap_grads);

private:
  FeatureExtractorSpec spec_;
  std::vector<std::unique_ptr<nn::Layer>> layers_;
  std::vector<nn::Param*> params_;
  int last_needed_ = 0;
};

// The asset-or-substitute policy: loads `asset` when non-empty, otherwise
// builds the seeded random-weight stand-in and reports it via `log` (one line).
FeatureExtractor make_extractor_vgg19(const std::filesystem::path& asset, std::ostream* log);
FeatureExtractor make_extractor_vggface(const std::filesystem::path& asset, std::ostream* log);

}  // namespace depix
