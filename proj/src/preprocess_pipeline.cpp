#include "mouthtrace/preprocess/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mouthtrace/parallel.hpp"

namespace mouthtrace::preprocess {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bilinear sample of an RGB image at (x, y); taps outside the image read 0.
inline void sample_bilinear(const Image& img, double x, double y, float out[3]) {
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  const double fx = x - fx0, fy = y - fy0;
  const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
  double acc[3] = {0.0, 0.0, 0.0};
  const double w[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0 || xs[k] < 0 || ys[k] < 0 || xs[k] >= img.width || ys[k] >= img.height) continue;
    const std::uint8_t* p = img.pixels.data() + (static_cast<std::size_t>(ys[k]) * img.width + xs[k]) * 3;
    for (int c = 0; c < 3; ++c) acc[c] += w[k] * p[c];
  }
  for (int c = 0; c < 3; ++c) out[c] = static_cast<float>(acc[c]);
}

inline float gray01(const float rgb[3]) { return static_cast<float>(luma(rgb[0], rgb[1], rgb[2]) / 255.0); }

Landmarks apply_all(const Similarity& s, const Landmarks& lm) {
  Landmarks out;
  for (std::size_t i = 0; i < lm.size(); ++i) out[i] = s.apply(lm[i]);
  return out;
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw DataError(where + ": missing string field '" + key + "'");
  return it->get<std::string>();
}

}  // namespace

FloatImage warp_frame(const Image& frame, const Similarity& to_output, int out_width, int out_height) {
  const Image rgb = to_rgb(frame);
  const Similarity inv = to_output.inverse();
  FloatImage out(out_width, out_height, 3);
  for (int v = 0; v < out_height; ++v)
    for (int u = 0; u < out_width; ++u) {
      const Point p = inv.apply({static_cast<double>(u), static_cast<double>(v)});
      sample_bilinear(rgb, p.x, p.y, &out.pixels[(static_cast<std::size_t>(v) * out_width + u) * 3]);
    }
  return out;
}

std::array<int, 2> crop_origin(const Landmarks& warped) {
  const Point c = mouth_centre(warped);
  return {static_cast<int>(std::lround(c.x)) - kMouthCrop / 2, static_cast<int>(std::lround(c.y)) - kMouthCrop / 2};
}

Tensor crop_mouth(const FloatImage& warped, const Landmarks& warped_landmarks) {
  if (warped.channels != 3) throw ShapeError("crop_mouth expects an RGB image");
  const auto [x0, y0] = crop_origin(warped_landmarks);
  Tensor out(Shape{kMouthCrop, kMouthCrop, 1});
  for (int y = 0; y < kMouthCrop; ++y)
    for (int x = 0; x < kMouthCrop; ++x) {
      const int sx = x0 + x, sy = y0 + y;
      if (sx < 0 || sy < 0 || sx >= warped.width || sy >= warped.height) continue;
      out[y * kMouthCrop + x] = gray01(&warped.pixels[(static_cast<std::size_t>(sy) * warped.width + sx) * 3]);
    }
  return out;
}

Tensor align_and_crop(const Image& frame, const Landmarks& smoothed) {
  const Similarity to_canon = estimate_similarity(five_points(smoothed));
  const Similarity inv = to_canon.inverse();
  const auto [x0, y0] = crop_origin(apply_all(to_canon, smoothed));
  const Image& rgb = frame.channels == 3 ? frame : to_rgb(frame);
  Tensor out(Shape{kMouthCrop, kMouthCrop, 1});
  float px[3];
  for (int y = 0; y < kMouthCrop; ++y)
    for (int x = 0; x < kMouthCrop; ++x) {
      const int u = x0 + x, v = y0 + y;
      if (u < 0 || v < 0 || u >= kCanonicalSize || v >= kCanonicalSize) continue;
      const Point p = inv.apply({static_cast<double>(u), static_cast<double>(v)});
      sample_bilinear(rgb, p.x, p.y, px);
      out[y * kMouthCrop + x] = gray01(px);
    }
  return out;
}

Tensor preprocess_frames(const std::vector<Image>& frames, const LandmarkTrack& landmarks,
                         const PreprocessOptions& options) {
  if (frames.size() != landmarks.size()) {
    throw DataError("video has " + std::to_string(frames.size()) + " frames but " + std::to_string(landmarks.size()) +
                    " landmark sets");
  }
  const LandmarkTrack smoothed = smooth_landmarks(landmarks, options.smoothing_window);
  const std::int64_t F = static_cast<std::int64_t>(frames.size());
  constexpr std::int64_t plane = kMouthCrop * kMouthCrop;
  Tensor out(Shape{F, kMouthCrop, kMouthCrop, 1});
  parallel_for(F, [&](std::int64_t t) {
    const Tensor crop = align_and_crop(frames[static_cast<std::size_t>(t)], smoothed[static_cast<std::size_t>(t)]);
    std::copy_n(crop.ptr(), plane, out.ptr() + t * plane);
  });
  return out;
}

Tensor make_clips(const Tensor& frames, std::int64_t clip_length, std::int64_t stride) {
  if (clip_length < 1 || stride < 1) throw ConfigError("clip length and stride must be positive");
  if (frames.rank() < 1) throw ShapeError("make_clips expects [F, ...]");
  const std::int64_t F = frames.dim(0);
  const std::int64_t per = F > 0 ? frames.numel() / F : 0;
  std::int64_t n = 0;
  for (std::int64_t s = 0; s + clip_length <= F; s += stride) ++n;
  Shape shape = frames.shape();
  shape[0] = clip_length;
  shape.insert(shape.begin(), n);
  Tensor out(shape);
  for (std::int64_t c = 0; c < n; ++c)
    std::copy_n(frames.ptr() + c * stride * per, clip_length * per, out.ptr() + c * clip_length * per);
  return out;
}

LandmarkTrack read_landmarks(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open landmarks " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw FormatError(path.string() + ": expected [frame][68][2]");
  LandmarkTrack track;
  for (const auto& frame : j) {
    if (!frame.is_array() || frame.size() != kLandmarkCount) {
      throw FormatError(path.string() + ": every frame needs 68 points");
    }
    Landmarks lm;
    for (std::size_t i = 0; i < lm.size(); ++i) {
      const auto& p = frame[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw FormatError(path.string() + ": points must be [x, y] numbers");
      }
      lm[i] = {p[0].get<double>(), p[1].get<double>()};
      if (!std::isfinite(lm[i].x) || !std::isfinite(lm[i].y)) throw FormatError(path.string() + ": non-finite point");
    }
    track.push_back(lm);
  }
  return track;
}

void write_landmarks(const fs::path& path, const LandmarkTrack& track) {
  json j = json::array();
  for (const auto& lm : track) {
    json frame = json::array();
    for (const auto& p : lm) frame.push_back({p.x, p.y});
    j.push_back(std::move(frame));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << "\n";
}

fs::path Manifest::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

Manifest read_manifest(const fs::path& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  static const std::set<std::string> known{"videoId", "framesPath", "landmarksPath", "label", "method",
                                           "dataset", "split",      "word",          "source", "clipsPath"};
  Manifest m;
  m.base_dir = path.parent_path();
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError(where + ": expected a JSON object");
    for (const auto& [k, v] : j.items())
      if (!known.count(k)) throw DataError(where + ": unknown field '" + k + "'");
    ManifestEntry e;
    e.video_id = require_string(j, "videoId", where);
    e.frames_path = require_string(j, "framesPath", where);
    e.landmarks_path = require_string(j, "landmarksPath", where);
    const std::string label = require_string(j, "label", where);
    if (label != "real" && label != "fake") throw DataError(where + ": label must be \"real\" or \"fake\"");
    e.label = label == "fake";
    e.method = require_string(j, "method", where);
    e.dataset = require_string(j, "dataset", where);
    e.split = require_string(j, "split", where);
    if (e.split != "train" && e.split != "val" && e.split != "test") {
      throw DataError(where + ": split must be train, val or test");
    }
    if (j.contains("word")) {
      if (!j["word"].is_number_integer()) throw DataError(where + ": word must be an integer");
      e.word = j["word"].get<int>();
    }
    if (j.contains("source")) e.source = require_string(j, "source", where);
    if (j.contains("clipsPath")) e.clips_path = require_string(j, "clipsPath", where);
    if (!ids.insert(e.video_id).second) throw DataError(where + ": duplicate videoId " + e.video_id);
    if (check_paths) {
      if (!e.clips_path.empty()) {
        if (!fs::exists(m.resolve(e.clips_path))) throw DataError(where + ": missing " + e.clips_path);
      } else {
        if (!fs::exists(m.resolve(e.frames_path))) throw DataError(where + ": missing " + e.frames_path);
        if (!fs::exists(m.resolve(e.landmarks_path))) throw DataError(where + ": missing " + e.landmarks_path);
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string manifest_line(const ManifestEntry& e) {
  json j;  // nlohmann orders object keys, so lines are stable
  j["videoId"] = e.video_id;
  j["framesPath"] = e.frames_path;
  j["landmarksPath"] = e.landmarks_path;
  j["label"] = e.label ? "fake" : "real";
  j["method"] = e.method;
  j["dataset"] = e.dataset;
  j["split"] = e.split;
  if (e.word) j["word"] = *e.word;
  if (!e.source.empty()) j["source"] = e.source;
  if (!e.clips_path.empty()) j["clipsPath"] = e.clips_path;
  return j.dump();
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : manifest.entries) out << manifest_line(e) << "\n";
}

void save_clip_cache(const fs::path& path, const Tensor& frames, std::int64_t clip_length, std::int64_t stride) {
  save_tensors(path, {{"clips", make_clips(frames, clip_length, stride)}, {"frames", frames}});
}

Tensor load_cached_frames(const fs::path& path) {
  auto map = load_tensors(path);
  auto it = map.find("frames");
  if (it == map.end()) throw DataError(path.string() + ": clip cache has no 'frames' tensor");
  return std::move(it->second);
}

Tensor load_cached_clips(const fs::path& path) {
  auto map = load_tensors(path);
  auto it = map.find("clips");
  if (it == map.end()) throw DataError(path.string() + ": clip cache has no 'clips' tensor");
  return std::move(it->second);
}

std::vector<Image> read_frames(const fs::path& dir) {
  std::vector<Image> frames;
  for (const auto& p : list_frames(dir)) frames.push_back(read_image(p));
  if (frames.empty()) throw DataError("no frames in " + dir.string());
  return frames;
}

Manifest preprocess_manifest(const Manifest& manifest, const fs::path& out_dir, const PreprocessRun& run) {
  fs::create_directories(out_dir);
  Manifest out = manifest;
  out.base_dir = out_dir;
  for (auto& e : out.entries) {
    const Tensor frames = preprocess_frames(read_frames(manifest.resolve(e.frames_path)),
                                            read_landmarks(manifest.resolve(e.landmarks_path)), run.options);
    const std::string name = e.video_id + ".lfw";
    save_clip_cache(out_dir / name, frames, run.clip_length, run.stride);
    const fs::path base = fs::absolute(out_dir);
    e.frames_path = fs::absolute(manifest.resolve(e.frames_path)).lexically_normal().lexically_relative(base).string();
    e.landmarks_path =
        fs::absolute(manifest.resolve(e.landmarks_path)).lexically_normal().lexically_relative(base).string();
    e.clips_path = name;
  }
  return out;
}

}  // namespace mouthtrace::preprocess
