#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "depix/frame.hpp"

namespace depix {

// One clip of the dataset. Directories are relative to the dataset root:
//   <root>/<clip_id>/hr/NNNNN.png        source crops (crop resolution)
//   <root>/<clip_id>/gt<hr>/NNNNN.png    ground-truth frames at hr_size
//   <root>/<clip_id>/pix<lr>/NNNNN.png   pixelated frames at hr_size
struct ClipManifest {
  std::string clip_id;
  int frame_count = 0;
  std::string hr_dir;
  std::string pix_dir;  // empty until generate_pixelated ran
  std::string gt_dir;   // empty until generate_pixelated ran
  int lr_size = 0;
  int hr_size = 0;
  std::string split = "train";  // train | test
};

struct CropSpec {
  enum class Source { kPrecropped, kExternalDetector };
  int crop_resolution = 256;
  Source source = Source::kPrecropped;
};

std::filesystem::path frame_path(const std::filesystem::path& root, const std::string& dir,
                                 int index);

// Ingests one clip (directory of frames, or a video file) into the dataset
// layout. Frames are resampled to the crop resolution if needed and numbered
// deterministically. Nothing is left behind on failure.
ClipManifest ingest(const std::filesystem::path& source, const CropSpec& crop,
                    const std::filesystem::path& out_root, const std::string& clip_id);

// Produces, for every HR frame, the hr_size ground truth (bicubic) and its
// pixelated counterpart (box to lr_size, nearest back up). Pixelation reads
// the quantized ground truth so stored pairs are exactly related by pixelate.
void generate_pixelated(const std::filesystem::path& root, ClipManifest& manifest, int lr_size,
                        int hr_size);

// Clip-level split, deterministic in (clip ids, seed). Mutates `split` fields.
void split_dataset(std::vector<ClipManifest>& clips, double test_fraction, uint64_t seed);

// JSON-lines manifest file at <root>/manifests.jsonl, atomic replace.
void write_manifests(const std::filesystem::path& root, const std::vector<ClipManifest>& clips);
std::vector<ClipManifest> read_manifests(const std::filesystem::path& root);

// Referential integrity: every listed frame exists and every file in managed
// directories is listed. Throws DataError with the first offender.
void fsck_dataset(const std::filesystem::path& root, const std::vector<ClipManifest>& clips);

}  // namespace depix
