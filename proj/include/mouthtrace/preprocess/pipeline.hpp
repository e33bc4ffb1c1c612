#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mouthtrace/checkpoint.hpp"
#include "mouthtrace/image.hpp"
#include "mouthtrace/preprocess/geometry.hpp"
#include "mouthtrace/tensor.hpp"

namespace mouthtrace::preprocess {

inline constexpr int kMouthCrop = 96;

/// Inverse-maps every output pixel through `to_output` and samples the
/// source bilinearly; samples outside the source read as 0.
FloatImage warp_frame(const Image& frame, const Similarity& to_output, int out_width = kCanonicalSize,
                      int out_height = kCanonicalSize);

/// BT.601 luma on the 0..255 scale.
inline double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

/// Top-left corner of the 96x96 window around the rounded mouth centre.
std::array<int, 2> crop_origin(const Landmarks& warped);

/// 96x96 grayscale crop centred on the mean mouth landmark (48-67), as
/// [96, 96, 1] in [0, 1]. Pixels outside the frame are 0.
Tensor crop_mouth(const FloatImage& warped, const Landmarks& warped_landmarks);

/// warp_frame followed by crop_mouth, but sampling only the 96x96 window.
/// Bitwise identical to the two-step path.
Tensor align_and_crop(const Image& frame, const Landmarks& smoothed);

struct PreprocessOptions {
  int smoothing_window = 12;
};

/// Aligned mouth frames [F, 96, 96, 1] for one video.
Tensor preprocess_frames(const std::vector<Image>& frames, const LandmarkTrack& landmarks,
                         const PreprocessOptions& options = {});

/// Windows of `clip_length` frames every `stride` frames from [F, ...];
/// [numClips, T, ...]. Shorter videos give zero clips.
Tensor make_clips(const Tensor& frames, std::int64_t clip_length, std::int64_t stride);

// ---------------------------------------------------------------------------
// Files.

/// JSON array [frame][68][2].
LandmarkTrack read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const LandmarkTrack& track);

struct ManifestEntry {
  std::string video_id;
  std::string frames_path;
  std::string landmarks_path;
  int label = 0;  // 0 real, 1 fake
  std::string method;
  std::string dataset;
  std::string split;  // train | val | test
  std::optional<int> word;
  std::string source;  // optional pairing key; empty when unknown
  std::string clips_path;  // set once preprocessed
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // relative paths resolve against this

  std::filesystem::path resolve(const std::string& p) const;
};

/// JSON-lines; fields videoId, framesPath, landmarksPath, label ("real" or
/// "fake"), method, dataset, split, and optional word, source, clipsPath.
/// Unknown fields and duplicate ids are rejected.
Manifest read_manifest(const std::filesystem::path& path, bool check_paths = true);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
std::string manifest_line(const ManifestEntry& entry);

/// Clip cache: tensors "clips" [numClips, T, 96, 96, 1] and "frames"
/// [F, 96, 96, 1].
void save_clip_cache(const std::filesystem::path& path, const Tensor& frames, std::int64_t clip_length,
                     std::int64_t stride);
Tensor load_cached_frames(const std::filesystem::path& path);
Tensor load_cached_clips(const std::filesystem::path& path);

std::vector<Image> read_frames(const std::filesystem::path& dir);

struct PreprocessRun {
  std::int64_t clip_length = 25;
  std::int64_t stride = 25;
  PreprocessOptions options;
};

/// Preprocesses every entry into `out_dir/<videoId>.lfw` and returns the
/// manifest with clipsPath filled in (paths relative to out_dir).
Manifest preprocess_manifest(const Manifest& manifest, const std::filesystem::path& out_dir, const PreprocessRun& run);

}  // namespace mouthtrace::preprocess
