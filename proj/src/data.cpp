#include "depix/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <opencv2/videoio.hpp>
#include <random>

#include "depix/resample.hpp"
#include "json.hpp"

namespace depix {

namespace fs = std::filesystem;

std::filesystem::path frame_path(const fs::path& root, const std::string& dir, int index) {
  char name[16];
  std::snprintf(name, sizeof(name), "%05d.png", index);
  return root / dir / name;
}

namespace {

Frame to_crop_resolution(const Frame& f, int crop_resolution) {
  if (f.height == crop_resolution && f.width == crop_resolution) return f;
  return resample(f, crop_resolution, crop_resolution, ResampleKernel::bicubic());
}

std::vector<Frame> decode_source(const fs::path& source, const CropSpec& crop) {
  std::vector<Frame> frames;
  if (fs::is_directory(source)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(source)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) frames.push_back(to_crop_resolution(load_png(p), crop.crop_resolution));
  } else if (fs::is_regular_file(source)) {
    cv::VideoCapture cap(source.string());
    if (!cap.isOpened()) {
      throw DataError("ingest: cannot decode video " + source.string());
    }
    cv::Mat bgr;
    while (cap.read(bgr)) {
      Frame f(bgr.rows, bgr.cols);
      for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
          for (int ch = 0; ch < 3; ++ch) f.at(y, x, ch) = row[x][2 - ch] / 255.f;
        }
      }
      frames.push_back(to_crop_resolution(f, crop.crop_resolution));
    }
  } else {
    throw DataError("ingest: unreadable source " + source.string());
  }
  if (frames.empty()) {
    throw DataError("ingest: no frames found in " + source.string());
  }
  return frames;
}

// quantization applied by save_png, without the disk round trip
Frame quantized(const Frame& f) {
  Frame q = f;
  for (auto& v : q.rgb) {
    v = std::floor(std::min(1.f, std::max(0.f, v)) * 255.f + 0.5f) / 255.f;
  }
  return q;
}

void to_json_line(nlohmann::ordered_json& j, const ClipManifest& m) {
  j = {{"clip_id", m.clip_id}, {"frame_count", m.frame_count}, {"hr_dir", m.hr_dir},
       {"pix_dir", m.pix_dir}, {"gt_dir", m.gt_dir},           {"lr_size", m.lr_size},
       {"hr_size", m.hr_size}, {"split", m.split}};
}

}  // namespace

ClipManifest ingest(const fs::path& source, const CropSpec& crop, const fs::path& out_root,
                    const std::string& clip_id) {
  if (crop.source == CropSpec::Source::kExternalDetector) {
    throw ConfigError(
        "ingest: external-detector cropping requested but no face-detector plug-in is "
        "configured; supply pre-cropped frames");
  }
  const std::vector<Frame> frames = decode_source(source, crop);

  // stage into a temp dir, rename into place only when complete
  const fs::path final_dir = out_root / clip_id;
  const fs::path tmp_dir = out_root / (clip_id + ".ingest-tmp");
  fs::remove_all(tmp_dir);
  fs::create_directories(tmp_dir / "hr");
  for (size_t i = 0; i < frames.size(); ++i) {
    save_png(frames[i], frame_path(out_root, clip_id + ".ingest-tmp/hr", static_cast<int>(i)));
  }
  fs::remove_all(final_dir);
  fs::rename(tmp_dir, final_dir);

  ClipManifest m;
  m.clip_id = clip_id;
  m.frame_count = static_cast<int>(frames.size());
  m.hr_dir = clip_id + "/hr";
  return m;
}

void generate_pixelated(const fs::path& root, ClipManifest& manifest, int lr_size, int hr_size) {
  const std::string gt_dir = manifest.clip_id + "/gt" + std::to_string(hr_size);
  const std::string pix_dir = manifest.clip_id + "/pix" + std::to_string(lr_size);
  fs::create_directories(root / gt_dir);
  fs::create_directories(root / pix_dir);
  for (int i = 0; i < manifest.frame_count; ++i) {
    const Frame hr = load_png(frame_path(root, manifest.hr_dir, i));
    const Frame gt = quantized(resample(hr, hr_size, hr_size, ResampleKernel::bicubic()));
    const Frame pix = pixelate(gt, lr_size, hr_size);
    save_png(gt, frame_path(root, gt_dir, i));
    save_png(pix, frame_path(root, pix_dir, i));
  }
  manifest.gt_dir = gt_dir;
  manifest.pix_dir = pix_dir;
  manifest.lr_size = lr_size;
  manifest.hr_size = hr_size;
}

void split_dataset(std::vector<ClipManifest>& clips, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("split_dataset: test_fraction must be in (0,1)");
  }
  if (clips.size() < 2) {
    throw DataError("split_dataset: need at least 2 clips to split");
  }
  std::vector<size_t> order(clips.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  // order by id first so the split depends only on content and seed
  std::sort(order.begin(), order.end(),
            [&clips](size_t a, size_t b) { return clips[a].clip_id < clips[b].clip_id; });
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<long long>(clips.size());
  long long n_test = std::llround(test_fraction * static_cast<double>(n));
  n_test = std::clamp<long long>(n_test, 1, n - 1);
  for (long long i = 0; i < n; ++i) {
    clips[order[static_cast<size_t>(i)]].split = i < n_test ? "test" : "train";
  }
}

void write_manifests(const fs::path& root, const std::vector<ClipManifest>& clips) {
  fs::create_directories(root);
  const fs::path tmp = root / "manifests.jsonl.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("write_manifests: cannot open " + tmp.string());
    for (const auto& m : clips) {
      nlohmann::ordered_json j;
      to_json_line(j, m);
      out << j.dump() << "\n";
    }
  }
  fs::rename(tmp, root / "manifests.jsonl");
}

std::vector<ClipManifest> read_manifests(const fs::path& root) {
  const fs::path path = root / "manifests.jsonl";
  std::ifstream in(path);
  if (!in) throw DataError("read_manifests: cannot open " + path.string());
  std::vector<ClipManifest> clips;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ClipManifest m;
    m.clip_id = j.at("clip_id").get<std::string>();
    m.frame_count = j.at("frame_count").get<int>();
    m.hr_dir = j.at("hr_dir").get<std::string>();
    m.pix_dir = j.value("pix_dir", "");
    m.gt_dir = j.value("gt_dir", "");
    m.lr_size = j.value("lr_size", 0);
    m.hr_size = j.value("hr_size", 0);
    m.split = j.value("split", "train");
    clips.push_back(std::move(m));
  }
  if (clips.empty()) throw DataError("read_manifests: no clips listed in " + path.string());
  return clips;
}

void fsck_dataset(const fs::path& root, const std::vector<ClipManifest>& clips) {
  for (const auto& m : clips) {
    for (const std::string& dir : {m.hr_dir, m.pix_dir, m.gt_dir}) {
      if (dir.empty()) continue;
      if (!fs::is_directory(root / dir)) {
        throw DataError("fsck: missing directory " + (root / dir).string());
      }
      // every listed frame exists
      for (int i = 0; i < m.frame_count; ++i) {
        if (!fs::exists(frame_path(root, dir, i))) {
          throw DataError("fsck: missing frame " + frame_path(root, dir, i).string());
        }
      }
      // every file present is listed
      size_t files = 0;
      for (const auto& e : fs::directory_iterator(root / dir)) {
        if (!e.is_regular_file()) continue;
        ++files;
      }
      if (files != static_cast<size_t>(m.frame_count)) {
        throw DataError("fsck: " + (root / dir).string() + " holds " + std::to_string(files) +
                        " files but manifest lists " + std::to_string(m.frame_count));
      }
    }
  }
}

}  // namespace depix
