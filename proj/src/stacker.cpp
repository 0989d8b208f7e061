#include "depix/stacker.hpp"

#include <fstream>

#include "depix/resample.hpp"
#include "depix/warp.hpp"

namespace depix {

std::vector<int> window_indices(int c, const SupportWindowSpec& spec, int clip_len) {
  spec.validate();
  if (c < 0 || c >= clip_len) {
    throw ContractError("window_indices: center " + std::to_string(c) + " outside clip of length " +
                        std::to_string(clip_len));
  }
  std::vector<int> out;
  out.reserve(spec.stack_frames());
  for (int j = -spec.w; j <= spec.w; ++j) {
    out.push_back(std::clamp(c + spec.d * j, 0, clip_len - 1));
  }
  return out;
}

ClipFrames clip_frames_from_pixelated(const std::vector<Frame>& pix_hr, int lr_size,
                                      const std::string& clip_id) {
  if (pix_hr.empty()) throw DataError("clip_frames_from_pixelated: no frames");
  ClipFrames clip;
  clip.clip_id = clip_id;
  clip.lr_size = lr_size;
  clip.hr_size = pix_hr.front().height;
  clip.lr.reserve(pix_hr.size());
  clip.hr_up.reserve(pix_hr.size());
  for (const Frame& p : pix_hr) {
    Frame lr = box_downsample(p, lr_size);
    clip.hr_up.push_back(resample(lr, clip.hr_size, clip.hr_size, ResampleKernel::bicubic()));
    clip.lr.push_back(std::move(lr));
  }
  return clip;
}

ClipFrames load_clip_frames(const std::filesystem::path& root, const ClipManifest& manifest) {
  if (manifest.pix_dir.empty()) {
    throw DataError("load_clip_frames: clip " + manifest.clip_id + " has no pixelated frames");
  }
  std::vector<Frame> pix;
  pix.reserve(manifest.frame_count);
  for (int i = 0; i < manifest.frame_count; ++i) {
    Frame f = load_png(frame_path(root, manifest.pix_dir, i));
    f.clip_id = manifest.clip_id;
    f.frame_index = i;
    pix.push_back(std::move(f));
  }
  return clip_frames_from_pixelated(pix, manifest.lr_size, manifest.clip_id);
}

FrameStack build_stack(const ClipFrames& clip, int c, const SupportWindowSpec& spec,
                       StnNet* aligner) {
  if (aligner && aligner->config().input_resolution != clip.lr_size) {
    throw ContractError("build_stack: aligner trained at resolution " +
                        std::to_string(aligner->config().input_resolution) +
                        " but clip LR is " + std::to_string(clip.lr_size));
  }
  FrameStack stack;
  stack.center_index = c;
  stack.source_indices = window_indices(c, spec, clip.size());
  stack.channels = Tensor(1, spec.stack_channels(), clip.hr_size, clip.hr_size);
  for (int k = 0; k < spec.stack_frames(); ++k) {
    const int j = stack.source_indices[static_cast<size_t>(k)];
    if (k == spec.w) {
      // center block: unwarped upsample of I_c
      frame_into_tensor(clip.hr_up[c], stack.channels, 0, 3 * k);
      continue;
    }
    Frame support = clip.hr_up[j];
    if (aligner) {
      const WarpGrid grid = aligner->predict_grid(clip.lr[c], clip.lr[j]);
      support = warp(support, upsample_grid(grid, clip.hr_size));
    }
    frame_into_tensor(support, stack.channels, 0, 3 * k);
  }
  return stack;
}

StackCache::StackCache(std::filesystem::path dir, uint64_t aligner_digest)
    : dir_(std::move(dir)), digest_(aligner_digest) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path StackCache::key_path(const std::string& clip_id, int c,
                                           const SupportWindowSpec& spec) const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "_c%05d_w%d_d%d_%016llx.stack", c, spec.w, spec.d,
                static_cast<unsigned long long>(digest_));
  return dir_ / (clip_id + buf);
}

bool StackCache::load(const std::string& clip_id, int c, const SupportWindowSpec& spec,
                      Tensor* out) const {
  std::ifstream in(key_path(clip_id, c, spec), std::ios::binary);
  if (!in) return false;
  int32_t dims[4];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in) return false;
  Tensor t(dims[0], dims[1], dims[2], dims[3]);
  in.read(reinterpret_cast<char*>(t.v.data()),
          static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!in) return false;
  *out = std::move(t);
  return true;
}

void StackCache::store(const std::string& clip_id, int c, const SupportWindowSpec& spec,
                       const Tensor& channels) const {
  const auto path = key_path(clip_id, c, spec);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;  // cache is best-effort
    const int32_t dims[4] = {channels.n, channels.c, channels.h, channels.w};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(channels.v.data()),
              static_cast<std::streamsize>(channels.size() * sizeof(float)));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
}

}  // namespace depix
