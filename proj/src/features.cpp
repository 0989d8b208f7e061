#include "depix/features.hpp"

#include <algorithm>
#include <ostream>

#include "depix/nets.hpp"

namespace depix {

namespace {

// Builds conv/relu blocks with a pool between scales, stopping after the last
// tapped layer. convs_per_block and the tap offsets follow the classic VGG
// feature indexing.
FeatureExtractorSpec vgg_like(const std::string& name, const std::vector<int>& convs_per_block,
                              const std::vector<int>& taps, double width_scale) {
  const int widths[5] = {64, 128, 256, 512, 512};
  FeatureExtractorSpec spec;
  spec.name = name;
  spec.tap_layers = taps;
  const int last_tap = *std::max_element(taps.begin(), taps.end());
  for (size_t block = 0; block < convs_per_block.size(); ++block) {
    const int ch = std::max(1, static_cast<int>(widths[block] * width_scale));
    for (int i = 0; i < convs_per_block[block]; ++i) {
      spec.layers.push_back({FeatOp::kConv, ch});
      spec.layers.push_back({FeatOp::kRelu, 0});
      if (static_cast<int>(spec.layers.size()) > last_tap) return spec;
    }
    spec.layers.push_back({FeatOp::kPool, 0});
    if (static_cast<int>(spec.layers.size()) > last_tap) return spec;
  }
  return spec;
}

}  // namespace

FeatureExtractorSpec FeatureExtractorSpec::vgg19_like(double width_scale) {
  return vgg_like("vgg19", {2, 2, 4, 4, 4}, {1, 6, 11, 20, 29}, width_scale);
}

FeatureExtractorSpec FeatureExtractorSpec::vggface_like(double width_scale) {
  return vgg_like("vggface", {2, 2, 3, 3, 3}, {1, 6, 11, 18, 25}, width_scale);
}

FeatureExtractorSpec FeatureExtractorSpec::identity() {
  FeatureExtractorSpec spec;
  spec.name = "identity";
  spec.layers = {{FeatOp::kIdentity, 0}};
  spec.tap_layers = {0};
  return spec;
}

void to_json(nlohmann::json& j, const FeatureExtractorSpec& s) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : s.layers) {
    layers.push_back({{"op", static_cast<int>(l.op)}, {"out_channels", l.out_channels}});
  }
  j = {{"name", s.name}, {"layers", layers}, {"tap_layers", s.tap_layers}};
}

void from_json(const nlohmann::json& j, FeatureExtractorSpec& s) {
  s.name = j.at("name").get<std::string>();
  s.layers.clear();
  for (const auto& l : j.at("layers")) {
    s.layers.push_back({static_cast<FeatOp>(l.at("op").get<int>()), l.at("out_channels").get<int>()});
  }
  j.at("tap_layers").get_to(s.tap_layers);
}

namespace {

// A pass-through layer so the identity extractor fits the Layer interface.
class IdentityLayer : public nn::Layer {
public:
  Tensor forward(const Tensor& x) override { return x; }
  Tensor backward(const Tensor& g, bool) override { return g; }
};

}  // namespace

FeatureExtractor::FeatureExtractor(FeatureExtractorSpec spec, uint64_t seed)
    : spec_(std::move(spec)) {
  if (spec_.tap_layers.empty()) {
    throw ConfigError("FeatureExtractor: at least one tap layer required");
  }
  std::mt19937_64 rng(seed);
  int in_ch = 3;
  int conv_idx = 0;
  for (const auto& l : spec_.layers) {
    switch (l.op) {
      case FeatOp::kConv: {
        auto conv = std::make_unique<nn::Conv2d>(in_ch, l.out_channels, 3, 1, 1,
                                                 spec_.name + ".conv" + std::to_string(conv_idx++));
        conv->init_he(rng);
        in_ch = l.out_channels;
        layers_.push_back(std::move(conv));
        break;
      }
      case FeatOp::kRelu:
        layers_.push_back(std::make_unique<nn::ReLU>());
        break;
      case FeatOp::kPool:
        layers_.push_back(std::make_unique<nn::MaxPool2x2>());
        break;
      case FeatOp::kIdentity:
        layers_.push_back(std::make_unique<IdentityLayer>());
        break;
    }
  }
  for (auto& l : layers_) {
    for (nn::Param* p : l->params()) params_.push_back(p);
  }
  for (int t : spec_.tap_layers) {
    if (t < 0 || t >= static_cast<int>(layers_.size())) {
      throw ConfigError("FeatureExtractor: tap layer " + std::to_string(t) + " out of range");
    }
    last_needed_ = std::max(last_needed_, t);
  }
}

std::vector<Tensor> FeatureExtractor::forward_taps(const Tensor& x) {
  if (x.c != 3) {
    throw ContractError("FeatureExtractor: expected RGB input, got " + x.shape_str());
  }
  std::vector<Tensor> taps(spec_.tap_layers.size());
  Tensor t = x;
  for (int i = 0; i <= last_needed_; ++i) {
    t = layers_[i]->forward(t);
    for (size_t k = 0; k < spec_.tap_layers.size(); ++k) {
      if (spec_.tap_layers[k] == i) taps[k] = t;
    }
  }
  return taps;
}

Tensor FeatureExtractor::backward_taps(const std::vector<Tensor>& tap_grads) {
  if (tap_grads.size() != spec_.tap_layers.size()) {
    throw ContractError("FeatureExtractor::backward_taps: gradient count mismatch");
  }
  Tensor g;
  bool live = false;
  for (int i = last_needed_; i >= 0; --i) {
    for (size_t k = 0; k < spec_.tap_layers.size(); ++k) {
      if (spec_.tap_layers[k] != i) continue;
      if (!live) {
        g = tap_grads[k];
        live = true;
      } else {
        for (size_t j = 0; j < g.v.size(); ++j) g.v[j] += tap_grads[k].v[j];
      }
    }
    g = layers_[i]->backward(g, /*accumulate_param_grads=*/false);
  }
  return g;
}

void FeatureExtractor::save(const std::filesystem::path& path) const {
  save_checkpoint(path, "extractor", nlohmann::json(spec_), params_);
}

FeatureExtractor FeatureExtractor::from_checkpoint(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.kind != "extractor") {
    throw ConfigError("expected an extractor checkpoint in " + path.string());
  }
  FeatureExtractor fx(ckpt.config.get<FeatureExtractorSpec>(), /*seed=*/0);
  load_params(ckpt, "extractor", ckpt.config, fx.params_);
  return fx;
}

namespace {

constexpr uint64_t kSubstituteSeed = 0x5eedfeed;
constexpr double kSubstituteWidthScale = 0.125;

FeatureExtractor make_extractor(const std::filesystem::path& asset, std::ostream* log,
                                FeatureExtractorSpec (*builder)(double), const char* vgg_name) {
  if (!asset.empty()) {
    if (!std::filesystem::exists(asset)) {
      throw ConfigError(std::string("feature extractor asset missing: ") + asset.string() +
                        " (" + vgg_name + ")");
    }
    return FeatureExtractor::from_checkpoint(asset);
  }
  FeatureExtractorSpec spec = builder(kSubstituteWidthScale);
  spec.name += "-random";
  if (log) {
    *log << "[features] no pretrained " << vgg_name
         << " asset configured; using fixed-seed random-weight substitute '" << spec.name << "'\n";
  }
  return FeatureExtractor(spec, kSubstituteSeed);
}

}  // namespace

FeatureExtractor make_extractor_vgg19(const std::filesystem::path& asset, std::ostream* log) {
  return make_extractor(asset, log, &FeatureExtractorSpec::vgg19_like, "vgg19");
}

FeatureExtractor make_extractor_vggface(const std::filesystem::path& asset, std::ostream* log) {
  return make_extractor(asset, log, &FeatureExtractorSpec::vggface_like, "vggface");
}

}  // namespace depix
