#include "mouthtrace/synth/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "mouthtrace/parallel.hpp"
#include "mouthtrace/preprocess/pipeline.hpp"
#include "mouthtrace/rng.hpp"

namespace mouthtrace::synth {

namespace fs = std::filesystem;
using preprocess::Landmarks;
using preprocess::Point;
using preprocess::Similarity;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Canonical layout (256x256 frame, same as the alignment reference).
constexpr double kMouthX = 128.0;
constexpr double kMouthY = 190.0;
constexpr double kMaxAperture = 14.0;
constexpr double kEdge = 1.5;  // anti-aliasing ramp width, canonical px
const double kTriangularScale = std::sqrt(6.0);

// Stream keys.
constexpr std::uint64_t kLipKey = 1;
constexpr std::uint64_t kForgeryKey = 2;
constexpr std::uint64_t kSplitKey = 3;
constexpr std::uint64_t kArtefactStream = 1u << 20;
constexpr std::uint64_t kNoiseStream = 1u << 21;
constexpr std::uint64_t kLandmarkStream = 1u << 22;

struct Wave {
  double kx = 0.0, ky = 0.0, phase = 0.0, amp = 0.0;
  double at(double x, double y) const { return amp * std::sin(kx * x + ky * y + phase); }
};

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
};

Rgb mix(const Rgb& under, const Rgb& over, double alpha) {
  return {under.r + alpha * (over.r - under.r), under.g + alpha * (over.g - under.g),
          under.b + alpha * (over.b - under.b)};
}

Rgb scaled(const Rgb& c, double f) { return {c.r * f, c.g * f, c.b * f}; }

// Coverage of an axis-aligned ellipse with a soft edge. Thin ellipses fade
// out with their minor radius so a closing aperture vanishes continuously.
double ellipse_coverage(double x, double y, double cx, double cy, double rx, double ry) {
  if (rx <= 0.0 || ry <= 0.0) return 0.0;
  if (std::abs(x - cx) > rx + kEdge || std::abs(y - cy) > ry + kEdge) return 0.0;
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  const double minor = std::min(rx, ry);
  const double sd = (std::sqrt(dx * dx + dy * dy) - 1.0) * minor;
  const double c = std::clamp(0.5 - sd / kEdge, 0.0, 1.0);
  return c * std::min(1.0, minor / kEdge);
}

/// Everything about a video except its mouth trajectory.
struct Scene {
  Similarity pose;  // canonical -> source
  double drift_freq = 0.0, drift_phase = 0.0;
  double drift_shift = 0.0, drift_angle = 0.0;
  Rgb skin, background;
  std::array<Wave, 3> skin_waves;
  std::array<Wave, 3> background_waves;
  double mouth_width = 30.0;
};

struct MouthShape {
  double aperture = 0.0;  // inner half-height
  double width = 30.0;    // outer half-width
  double lip = 7.0;       // lip thickness added to the aperture
};

Wave random_wave(Rng& rng, double amp_lo, double amp_hi, double period_lo, double period_hi) {
  const double period = period_lo + (period_hi - period_lo) * rng.uniform();
  const double dir = kTwoPi * rng.uniform();
  const double k = kTwoPi / period;
  return {k * std::cos(dir), k * std::sin(dir), kTwoPi * rng.uniform(), amp_lo + (amp_hi - amp_lo) * rng.uniform()};
}

Scene random_scene(Rng& rng, int image_size) {
  Scene s;
  const double ratio = image_size / 128.0;
  const double scale = (0.42 + 0.08 * rng.uniform()) * ratio;
  const double angle = (rng.uniform() * 2.0 - 1.0) * 12.0 * std::numbers::pi / 180.0;
  const double cx = image_size / 2.0 + (rng.uniform() * 8.0 - 4.0) * ratio;
  const double cy = image_size / 2.0 + (rng.uniform() * 8.0 - 4.0) * ratio;
  // Anchor canonical (128, 150) at (cx, cy).
  const Similarity rot = Similarity::from_params(scale, angle, 0.0, 0.0);
  const Point a = rot.apply({128.0, 150.0});
  s.pose = Similarity::from_params(scale, angle, cx - a.x, cy - a.y);
  s.drift_freq = 0.01 + 0.02 * rng.uniform();
  s.drift_phase = kTwoPi * rng.uniform();
  s.drift_shift = 1.5 * ratio * rng.uniform();
  s.drift_angle = 1.5 * std::numbers::pi / 180.0 * rng.uniform();
  s.skin = {190.0 + 25.0 * rng.uniform(), 150.0 + 20.0 * rng.uniform(), 125.0 + 20.0 * rng.uniform()};
  const double bg = 60.0 + 80.0 * rng.uniform();
  s.background = {bg + 20.0 * rng.uniform(), bg + 20.0 * rng.uniform(), bg + 20.0 * rng.uniform()};
  for (auto& w : s.skin_waves) w = random_wave(rng, 2.0, 6.0, 20.0, 60.0);
  for (auto& w : s.background_waves) w = random_wave(rng, 6.0, 15.0, 6.0, 24.0);
  s.mouth_width = 26.0 + 6.0 * rng.uniform();
  return s;
}

Similarity frame_pose(const Scene& s, int t) {
  const double phase = kTwoPi * s.drift_freq * t + s.drift_phase;
  const Similarity wobble =
      Similarity::from_params(1.0, s.drift_angle * std::sin(phase), s.drift_shift * std::cos(phase),
                              s.drift_shift * std::sin(0.7 * phase));
  // Wobble about the face anchor in canonical space, then place the face.
  const Similarity to_anchor = Similarity::from_params(1.0, 0.0, -128.0, -150.0);
  const Similarity from_anchor = Similarity::from_params(1.0, 0.0, 128.0, 150.0);
  return s.pose.compose(from_anchor.compose(wobble.compose(to_anchor)));
}

Rgb shade_canonical(const Scene& s, const MouthShape& m, double x, double y) {
  double tex = 0.0;
  for (const auto& w : s.skin_waves) tex += w.at(x, y);
  Rgb c{s.skin.r + tex, s.skin.g + tex, s.skin.b + tex};
  const Rgb brow = scaled(s.skin, 0.55);
  c = mix(c, brow, ellipse_coverage(x, y, 85.0, 84.0, 20.0, 3.5));
  c = mix(c, brow, ellipse_coverage(x, y, 171.0, 84.0, 20.0, 3.5));
  const Rgb eye{55.0, 42.0, 42.0};
  c = mix(c, eye, ellipse_coverage(x, y, 88.0, 104.0, 14.0, 6.0));
  c = mix(c, eye, ellipse_coverage(x, y, 168.0, 104.0, 14.0, 6.0));
  c = mix(c, scaled(s.skin, 0.8), ellipse_coverage(x, y, 128.0, 152.0, 11.0, 6.0));
  const Rgb lips{175.0, 85.0, 90.0};
  const Rgb cavity{45.0, 20.0, 25.0};
  c = mix(c, lips, ellipse_coverage(x, y, kMouthX, kMouthY, m.width, m.lip + m.aperture));
  c = mix(c, cavity, ellipse_coverage(x, y, kMouthX, kMouthY, 0.8 * m.width, m.aperture));
  return c;
}

// Static background texture, shared by all frames of a video.
std::vector<double> background_texture(const Scene& s, int size) {
  std::vector<double> tex(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double v = 0.0;
      for (const auto& w : s.background_waves) v += w.at(x, y);
      tex[static_cast<std::size_t>(y) * size + x] = v;
    }
  return tex;
}

Image render_frame(const Scene& s, const std::vector<double>& background, const MouthShape& m, const Similarity& pose,
                   int size, double noise_sigma, Rng noise) {
  const Similarity to_canonical = pose.inverse();
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double tex = background[static_cast<std::size_t>(y) * size + x];
      Rgb c{s.background.r + tex, s.background.g + tex, s.background.b + tex};
      const Point q = to_canonical.apply({static_cast<double>(x), static_cast<double>(y)});
      const double face = ellipse_coverage(q.x, q.y, 128.0, 150.0, 100.0, 125.0);
      if (face > 0.0) c = mix(c, shade_canonical(s, m, q.x, q.y), face);
      const double v[3] = {c.r, c.g, c.b};
      for (int ch = 0; ch < 3; ++ch) {
        // Triangular noise with standard deviation noise_sigma; much cheaper
        // than Gaussian draws and just as good for appearance noise.
        const double n = noise_sigma > 0.0 ? noise_sigma * kTriangularScale * (noise.uniform() + noise.uniform() - 1.0) : 0.0;
        img.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v[ch] + n), 0L, 255L));
      }
    }
  return img;
}

Point ellipse_point(double rx, double ry, double angle) {
  return {kMouthX + rx * std::cos(angle), kMouthY + ry * std::sin(angle)};
}

// 68 canonical landmarks; the mouth points follow the drawn ellipses.
Landmarks canonical_landmarks(const MouthShape& m) {
  Landmarks lm{};
  for (int i = 0; i <= 16; ++i) {
    const double th = std::numbers::pi * (1.0 - i / 16.0);
    lm[i] = {128.0 + 90.0 * std::cos(th), 120.0 + 125.0 * std::sin(th)};
  }
  for (int i = 0; i < 5; ++i) {
    lm[17 + i] = {65.0 + 10.0 * i, 84.0};
    lm[22 + i] = {151.0 + 10.0 * i, 84.0};
  }
  lm[27] = {128.0, 100.0};
  lm[28] = {128.0, 118.0};
  lm[29] = {128.0, 132.0};
  lm[30] = {128.0, 146.0};
  lm[31] = {114.0, 156.0};
  lm[32] = {121.0, 158.0};
  lm[33] = {128.0, 158.0};
  lm[34] = {135.0, 158.0};
  lm[35] = {142.0, 156.0};
  const Point eye[6] = {{-14, 0}, {-5, -6}, {5, -6}, {14, 0}, {5, 6}, {-5, 6}};
  for (int i = 0; i < 6; ++i) {
    lm[36 + i] = {88.0 + eye[i].x, 104.0 + eye[i].y};
    lm[42 + i] = {168.0 + eye[i].x, 104.0 + eye[i].y};
  }
  // Outer lip 48..59 clockwise from the left corner; inner 60..67 likewise.
  const double outer_h = m.lip + m.aperture;
  for (int i = 0; i < 12; ++i) lm[48 + i] = ellipse_point(m.width, outer_h, std::numbers::pi + kTwoPi * i / 12.0);
  for (int i = 0; i < 8; ++i) lm[60 + i] = ellipse_point(0.8 * m.width, m.aperture, std::numbers::pi + kTwoPi * i / 8.0);
  return lm;
}

/// Shared per-video rendering given the per-frame mouth shapes.
SynthVideo render_video(const Scene& scene, const std::vector<MouthShape>& mouths, const SynthConfig& cfg,
                        const Rng& video_rng) {
  SynthVideo v;
  const int F = static_cast<int>(mouths.size());
  v.frames.resize(F);
  v.landmarks.resize(F);
  v.aperture.resize(F);
  const std::vector<double> background = background_texture(scene, cfg.image_size);
  for (int t = 0; t < F; ++t) {
    const Similarity pose = frame_pose(scene, t);
    v.frames[t] = render_frame(scene, background, mouths[t], pose, cfg.image_size, cfg.noise_sigma,
                               video_rng.substream(kNoiseStream, static_cast<std::uint64_t>(t)));
    Rng lm_noise = video_rng.substream(kLandmarkStream, static_cast<std::uint64_t>(t));
    const Landmarks canon = canonical_landmarks(mouths[t]);
    const double sigma = 0.25 * cfg.image_size / 128.0;
    for (int i = 0; i < preprocess::kLandmarkCount; ++i) {
      const Point p = pose.apply(canon[i]);
      const double nx = lm_noise.normal(), ny = lm_noise.normal();
      v.landmarks[t][i] = {p.x + sigma * nx, p.y + sigma * ny};
    }
    v.aperture[t] = mouths[t].aperture;
  }
  return v;
}

/// Speech-like smooth aperture: a clipped sum of slow sinusoids, so the mouth
/// closes for part of the time.
struct SpeechTrajectory {
  std::array<double, 3> freq{}, phase{}, weight{};

  double operator()(double t) const {
    double s = 0.25;
    for (int k = 0; k < 3; ++k) s += weight[k] * std::sin(kTwoPi * freq[k] * t + phase[k]);
    return kMaxAperture * std::max(0.0, s);
  }
};

SpeechTrajectory random_speech(Rng& rng) {
  SpeechTrajectory tr;
  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    tr.freq[k] = 0.03 + 0.07 * rng.uniform();
    tr.phase[k] = kTwoPi * rng.uniform();
    tr.weight[k] = 0.5 + rng.uniform();
    total += tr.weight[k];
  }
  for (auto& w : tr.weight) w *= 0.75 / total;
  return tr;
}

std::string padded(const char* prefix, std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05lld", prefix, static_cast<long long>(i));
  return buf;
}

}  // namespace

ArtefactFamily parse_family(const std::string& name) {
  if (name == "jitter") return ArtefactFamily::jitter;
  if (name == "shape_flicker") return ArtefactFamily::shape_flicker;
  if (name == "incomplete_close") return ArtefactFamily::incomplete_close;
  throw ConfigError("unknown artefact family '" + name + "' (jitter, shape_flicker, incomplete_close)");
}

const char* family_name(ArtefactFamily family) {
  switch (family) {
    case ArtefactFamily::jitter: return "jitter";
    case ArtefactFamily::shape_flicker: return "shape_flicker";
    case ArtefactFamily::incomplete_close: return "incomplete_close";
  }
  return "unknown";
}

void SynthConfig::validate() const {
  if (num_videos < 0) throw ConfigError("numVideos must be non-negative");
  if (frames_per_video < 1) throw ConfigError("framesPerVideo must be at least 1");
  if (!(strength >= 0.0)) throw ConfigError("artefactStrength must be non-negative");
  if (image_size < 64) throw ConfigError("imageSize must be at least 64");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noiseSigma must be non-negative");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("testFraction must be in [0, 1)");
}

std::vector<SynthVideo> gen_lipreading(const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.vocab < 2) throw ConfigError("lipreading needs a vocabulary of at least 2 words");
  const Rng base(cfg.seed);
  std::vector<SynthVideo> out(cfg.num_videos);
  parallel_for(cfg.num_videos, [&](std::int64_t i) {
    const Rng video_rng = base.substream(kLipKey, static_cast<std::uint64_t>(i));
    Rng rng = video_rng.substream(0, 0);
    const int word = static_cast<int>(i % cfg.vocab);
    const Scene scene = random_scene(rng, cfg.image_size);
    const double freq = 0.04 + 0.2 * word / (cfg.vocab - 1);
    const double phase = kTwoPi * rng.uniform();
    const double amp = kMaxAperture * (0.7 + 0.3 * rng.uniform());
    std::vector<MouthShape> mouths(cfg.frames_per_video);
    for (int t = 0; t < cfg.frames_per_video; ++t)
      mouths[t] = {amp * (0.5 - 0.5 * std::cos(kTwoPi * freq * t + phase)), scene.mouth_width, 7.0};
    SynthVideo v = render_video(scene, mouths, cfg, video_rng);
    v.id = padded("word", i);
    v.source = v.id;
    v.label = word;
    v.method = "lipreading";
    out[i] = std::move(v);
  });
  return out;
}

std::vector<SynthVideo> gen_forgery(const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.num_videos % 2 != 0) throw ConfigError("forgery corpus needs an even numVideos (real/fake pairs)");
  const std::int64_t sources = cfg.num_videos / 2;
  const Rng base(cfg.seed);
  std::vector<SynthVideo> out(cfg.num_videos);
  parallel_for(cfg.num_videos, [&](std::int64_t k) {
    const std::int64_t i = k / 2;
    const bool fake = k % 2 == 1;
    const Rng video_rng = base.substream(kForgeryKey, static_cast<std::uint64_t>(i));
    Rng rng = video_rng.substream(0, 0);
    const Scene scene = random_scene(rng, cfg.image_size);
    const SpeechTrajectory speech = random_speech(rng);
    Rng art = video_rng.substream(kArtefactStream, 0);
    const int F = cfg.frames_per_video;
    const double s = cfg.strength;
    std::vector<MouthShape> mouths(F);
    for (int t = 0; t < F; ++t) {
      MouthShape m{speech(t), scene.mouth_width, 7.0};
      if (fake) {
        switch (cfg.family) {
          case ArtefactFamily::jitter:
            m.aperture = speech(t + 1.5 * s * art.normal());
            break;
          case ArtefactFamily::shape_flicker: {
            const double ew = art.normal(), eh = art.normal();
            m.width *= std::max(0.2, 1.0 + 0.12 * s * ew);
            m.aperture *= std::max(0.0, 1.0 + 0.25 * s * eh);
            break;
          }
          case ArtefactFamily::incomplete_close:
            m.aperture = std::max(m.aperture, 4.0 * s);
            break;
        }
      }
      mouths[t] = m;
    }
    SynthVideo v = render_video(scene, mouths, cfg, video_rng);
    v.source = padded("src", i);
    v.id = v.source + (fake ? "_fake" : "_real");
    v.label = fake ? 1 : 0;
    v.method = fake ? family_name(cfg.family) : "original";
    out[k] = std::move(v);
  });
  (void)sources;
  return out;
}

std::vector<std::string> assign_splits(const std::vector<SynthVideo>& videos, double test_fraction,
                                       std::uint64_t seed) {
  std::vector<std::string> sources;
  for (const auto& v : videos) sources.push_back(v.source);
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  Rng rng = Rng(seed).substream(kSplitKey, 0);
  shuffle(sources, rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(sources.size())));
  std::vector<std::string> test(sources.begin(), sources.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(test.begin(), test.end());
  std::vector<std::string> splits;
  for (const auto& v : videos)
    splits.push_back(std::binary_search(test.begin(), test.end(), v.source) ? "test" : "train");
  return splits;
}

void write_corpus(const std::vector<SynthVideo>& videos, const std::vector<std::string>& splits,
                  const std::string& dataset, const fs::path& out_dir, bool lipreading) {
  if (splits.size() != videos.size()) throw ConfigError("write_corpus: one split per video required");
  fs::create_directories(out_dir / "frames");
  fs::create_directories(out_dir / "landmarks");
  parallel_for(static_cast<std::int64_t>(videos.size()), [&](std::int64_t i) {
    const SynthVideo& v = videos[i];
    const fs::path dir = out_dir / "frames" / v.id;
    fs::create_directories(dir);
    for (std::size_t t = 0; t < v.frames.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "%05zu.png", t);
      write_image(dir / name, v.frames[t]);
    }
    preprocess::write_landmarks(out_dir / "landmarks" / (v.id + ".json"), v.landmarks);
  });
  preprocess::Manifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const SynthVideo& v = videos[i];
    preprocess::ManifestEntry e;
    e.video_id = v.id;
    e.frames_path = "frames/" + v.id;
    e.landmarks_path = "landmarks/" + v.id + ".json";
    e.label = lipreading ? 0 : v.label;
    if (lipreading) e.word = v.label;
    e.method = v.method;
    e.dataset = dataset;
    e.split = splits[i];
    e.source = v.source;
    manifest.entries.push_back(std::move(e));
  }
  preprocess::write_manifest(out_dir / "manifest.jsonl", manifest);
}

}  // namespace mouthtrace::synth
