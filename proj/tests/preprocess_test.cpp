#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mouthtrace/preprocess/geometry.hpp"
#include "mouthtrace/preprocess/pipeline.hpp"
#include "mouthtrace/rng.hpp"
#include "mouthtrace/synth/synthetic.hpp"

using namespace mouthtrace;
using namespace mouthtrace::preprocess;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mouthtrace_preprocess_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Landmarks constant_landmarks(double x, double y) {
  Landmarks lm;
  for (auto& p : lm) p = {x, y};
  return lm;
}

// Landmarks whose five alignment points sit exactly on the mean face.
Landmarks mean_face_landmarks(Point mouth) {
  Landmarks lm = constant_landmarks(0.0, 0.0);
  for (int i = 36; i <= 41; ++i) lm[i] = kMeanFace[0];
  for (int i = 42; i <= 47; ++i) lm[i] = kMeanFace[1];
  lm[28] = kMeanFace[2];
  lm[30] = kMeanFace[3];
  lm[33] = kMeanFace[4];
  for (int i = 48; i <= 67; ++i) lm[i] = mouth;
  return lm;
}

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

}  // namespace

// ---------------------------------------------------------------------------
// Smoothing.

TEST(Smoothing, ConstantTrackUnchanged) {
  LandmarkTrack track(30, constant_landmarks(3.25, -7.5));
  const auto out = smooth_landmarks(track, 12);
  for (const auto& lm : out)
    for (const auto& p : lm) {
      EXPECT_NEAR(p.x, 3.25, 1e-12);
      EXPECT_NEAR(p.y, -7.5, 1e-12);
    }
}

TEST(Smoothing, SingleFrameUnchanged) {
  LandmarkTrack track(1, constant_landmarks(1.0, 2.0));
  track[0][5] = {9.0, -4.0};
  const auto out = smooth_landmarks(track, 12);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0][5].x, 9.0);
  EXPECT_EQ(out[0][5].y, -4.0);
}

TEST(Smoothing, ImpulseResponseIsBoxOfTwelve) {
  LandmarkTrack track(40, constant_landmarks(0.0, 0.0));
  track[20][0] = {1.0, 1.0};
  const auto out = smooth_landmarks(track, 12);
  EXPECT_NEAR(out[20][0].x, 1.0 / 12.0, 1e-12);
  // Frame t sees the impulse iff t - 6 <= 20 <= t + 5.
  for (int t = 0; t < 40; ++t) {
    const double expected = (t >= 15 && t <= 26) ? 1.0 / 12.0 : 0.0;
    EXPECT_NEAR(out[t][0].y, expected, 1e-12) << "frame " << t;
  }
}

TEST(Smoothing, EndsAverageTruncatedWindow) {
  LandmarkTrack track(10, constant_landmarks(0.0, 0.0));
  for (int t = 0; t < 10; ++t) track[t][0].x = t;
  const auto out = smooth_landmarks(track, 4);
  EXPECT_NEAR(out[0][0].x, (0 + 1) / 2.0, 1e-12);       // [-2, 1] -> [0, 1]
  EXPECT_NEAR(out[5][0].x, (3 + 4 + 5 + 6) / 4.0, 1e-12);
  EXPECT_NEAR(out[9][0].x, (7 + 8 + 9) / 3.0, 1e-12);    // [7, 10] -> [7, 9]
}

TEST(Smoothing, RejectsBadWindow) { EXPECT_THROW(smooth_landmarks(LandmarkTrack(3), 0), ConfigError); }

// ---------------------------------------------------------------------------
// Similarity estimation.

TEST(Similarity, IdentityOnMeanFace) {
  const Similarity s = estimate_similarity(kMeanFace);
  EXPECT_NEAR(s.a, 1.0, 1e-12);
  EXPECT_NEAR(s.b, 0.0, 1e-12);
  EXPECT_NEAR(s.tx, 0.0, 1e-9);
  EXPECT_NEAR(s.ty, 0.0, 1e-9);
}

TEST(Similarity, RecoversRotationAndScale) {
  const Similarity forward = Similarity::from_params(2.0, 30.0 * std::numbers::pi / 180.0, 17.0, -5.0);
  FivePoints src;
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = forward.apply(kMeanFace[i]);
  const Similarity s = estimate_similarity(src);
  double residual = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Point p = s.apply(src[i]);
    residual = std::max({residual, std::abs(p.x - kMeanFace[i].x), std::abs(p.y - kMeanFace[i].y)});
  }
  EXPECT_LE(residual, 1e-6);
  const Similarity back = s.compose(forward);
  EXPECT_NEAR(back.a, 1.0, 1e-9);
  EXPECT_NEAR(back.b, 0.0, 1e-9);
}

TEST(Similarity, LeastSquaresMatchesNormalEquations) {
  // Independent oracle: solve the 4x4 normal equations of the linear model.
  Rng rng(3);
  FivePoints src;
  for (auto& p : src) p = {rng.uniform() * 100, rng.uniform() * 100};
  double A[4][4] = {}, r[4] = {};
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double rows[2][4] = {{src[i].x, -src[i].y, 1, 0}, {src[i].y, src[i].x, 0, 1}};
    const double rhs[2] = {kMeanFace[i].x, kMeanFace[i].y};
    for (int k = 0; k < 2; ++k)
      for (int u = 0; u < 4; ++u) {
        r[u] += rows[k][u] * rhs[k];
        for (int v = 0; v < 4; ++v) A[u][v] += rows[k][u] * rows[k][v];
      }
  }
  for (int c = 0; c < 4; ++c) {  // Gauss-Jordan
    int piv = c;
    for (int k = c + 1; k < 4; ++k)
      if (std::abs(A[k][c]) > std::abs(A[piv][c])) piv = k;
    std::swap(A[c], A[piv]);
    std::swap(r[c], r[piv]);
    for (int k = 0; k < 4; ++k) {
      if (k == c) continue;
      const double f = A[k][c] / A[c][c];
      for (int v = 0; v < 4; ++v) A[k][v] -= f * A[c][v];
      r[k] -= f * r[c];
    }
  }
  const Similarity s = estimate_similarity(src);
  EXPECT_NEAR(s.a, r[0] / A[0][0], 1e-9);
  EXPECT_NEAR(s.b, r[1] / A[1][1], 1e-9);
  EXPECT_NEAR(s.tx, r[2] / A[2][2], 1e-6);
  EXPECT_NEAR(s.ty, r[3] / A[3][3], 1e-6);
}

TEST(Similarity, CoincidentPointsRejected) {
  FivePoints same;
  for (auto& p : same) p = {10.0, 10.0};
  EXPECT_THROW(estimate_similarity(same), DataError);
}

TEST(Similarity, InverseAndCompose) {
  const Similarity s = Similarity::from_params(0.7, -0.4, 3.0, 8.0);
  const Point p{12.5, -3.0};
  const Point q = s.inverse().apply(s.apply(p));
  EXPECT_NEAR(q.x, p.x, 1e-12);
  EXPECT_NEAR(q.y, p.y, 1e-12);
}

// ---------------------------------------------------------------------------
// Warp and crop.

TEST(Warp, IdentityReproducesImage) {
  const Image img = random_image(40, 30, 1);
  const FloatImage out = warp_frame(img, Similarity{}, 40, 30);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) ASSERT_EQ(out.pixels[i], img.pixels[i]);
}

TEST(Warp, IntegerTranslationShifts) {
  const Image img = random_image(20, 20, 2);
  const FloatImage out = warp_frame(img, Similarity::from_params(1.0, 0.0, 1.0, 0.0), 20, 20);
  for (int y = 0; y < 20; ++y) {
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(0, y, c), 0.0f);  // outside the source
    for (int x = 1; x < 20; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(x, y, c), img.at(x - 1, y, c));
  }
}

TEST(Warp, ConstantImageStaysConstantInside) {
  const Image img(64, 64, 3, 77);
  const Similarity s = Similarity::from_params(1.3, 0.3, -5.0, 4.0);
  const FloatImage out = warp_frame(img, s, 64, 64);
  const Similarity inv = s.inverse();
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const Point p = inv.apply({double(x), double(y)});
      if (p.x < 0 || p.y < 0 || p.x > 63 || p.y > 63) continue;
      ASSERT_NEAR(out.at(x, y, 1), 77.0f, 1e-4f);
    }
}

TEST(Crop, WindowCentredOnMouth) {
  FloatImage warped(256, 256, 3);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x)
      for (int c = 0; c < 3; ++c) warped.at(x, y, c) = static_cast<float>((x + 3 * y) % 256);
  const Landmarks lm = constant_landmarks(130.4, 187.6);
  const auto origin = crop_origin(lm);
  EXPECT_EQ(origin[0], 130 - 48);
  EXPECT_EQ(origin[1], 188 - 48);
  const Tensor crop = crop_mouth(warped, lm);
  ASSERT_EQ(crop.shape(), (Shape{96, 96, 1}));
  for (int y : {0, 50, 95})
    for (int x : {0, 17, 95}) {
      const double v = ((origin[0] + x + 3 * (origin[1] + y)) % 256) / 255.0;
      EXPECT_NEAR(crop[y * 96 + x], v, 1e-6);
    }
}

TEST(Crop, GrayAndRedLuma) {
  FloatImage gray(256, 256, 3, 100.0f);
  const Tensor g = crop_mouth(gray, constant_landmarks(128, 128));
  for (float v : g.data()) ASSERT_NEAR(v, 100.0 / 255.0, 1e-6);

  FloatImage red(256, 256, 3, 0.0f);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) red.at(x, y, 0) = 255.0f;
  const Tensor r = crop_mouth(red, constant_landmarks(128, 128));
  EXPECT_NEAR(r[0], 0.299, 1e-6);
}

TEST(Crop, OutsideFrameIsZero) {
  FloatImage img(256, 256, 3, 200.0f);
  const Tensor crop = crop_mouth(img, constant_landmarks(10, 10));  // origin (-38, -38)
  EXPECT_EQ(crop[0], 0.0f);
  EXPECT_EQ(crop[37 * 96 + 37], 0.0f);
  EXPECT_NEAR(crop[38 * 96 + 38], 200.0 / 255.0, 1e-6);
}

TEST(Crop, FusedPathBitwiseEqualsTwoStep) {
  const synth::SynthConfig cfg{.num_videos = 2, .frames_per_video = 6, .seed = 11};
  const auto videos = synth::gen_forgery(cfg);
  for (const auto& v : videos) {
    const LandmarkTrack smoothed = smooth_landmarks(v.landmarks);
    for (std::size_t t = 0; t < v.frames.size(); ++t) {
      const Similarity s = estimate_similarity(five_points(smoothed[t]));
      Landmarks warped;
      for (int i = 0; i < kLandmarkCount; ++i) warped[i] = s.apply(smoothed[t][i]);
      const Tensor two_step = crop_mouth(warp_frame(v.frames[t], s), warped);
      const Tensor fused = align_and_crop(v.frames[t], smoothed[t]);
      ASSERT_EQ(two_step.data().size(), fused.data().size());
      for (std::size_t i = 0; i < fused.data().size(); ++i) ASSERT_EQ(two_step[i], fused[i]);
    }
  }
}

TEST(Pipeline, MeanFaceInputNeedsNoWarp) {
  const Image img = random_image(256, 256, 5);
  const Landmarks lm = mean_face_landmarks({128, 186});
  const Tensor out = preprocess_frames({img}, LandmarkTrack{lm});
  ASSERT_EQ(out.shape(), (Shape{1, 96, 96, 1}));
  for (int y = 0; y < 96; y += 7)
    for (int x = 0; x < 96; x += 7) {
      const int sx = 80 + x, sy = 138 + y;
      const double v = luma(img.at(sx, sy, 0), img.at(sx, sy, 1), img.at(sx, sy, 2)) / 255.0;
      ASSERT_NEAR(out[y * 96 + x], v, 1e-5);
    }
}

TEST(Pipeline, CountMismatchRejected) {
  const Image img(64, 64, 3);
  EXPECT_THROW(preprocess_frames({img, img}, LandmarkTrack(1)), DataError);
}

// Moving the whole video by a similarity (frames and landmarks together)
// must not change the aligned crops beyond interpolation error.
TEST(Pipeline, GlobalSimilarityInvariance) {
  const synth::SynthConfig cfg{.num_videos = 2, .frames_per_video = 16, .seed = 21};
  const auto videos = synth::gen_forgery(cfg);
  Rng rng(99);
  for (const auto& v : videos) {
    const double scale = 0.85 + 0.3 * rng.uniform();
    const double angle = (rng.uniform() * 2 - 1) * 0.35;
    const Similarity rot = Similarity::from_params(scale, angle, 0, 0);
    const Point c = rot.apply({64, 64});
    const Similarity g = Similarity::from_params(scale, angle, 96 - c.x + 6 * rng.uniform(), 96 - c.y + 6 * rng.uniform());
    std::vector<Image> moved;
    LandmarkTrack moved_lm;
    for (std::size_t t = 0; t < v.frames.size(); ++t) {
      const FloatImage w = warp_frame(v.frames[t], g, 192, 192);
      Image img(192, 192, 3);
      for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(w.pixels[i]));
      moved.push_back(std::move(img));
      Landmarks lm;
      for (int i = 0; i < kLandmarkCount; ++i) lm[i] = g.apply(v.landmarks[t][i]);
      moved_lm.push_back(lm);
    }
    const Tensor a = preprocess_frames(v.frames, v.landmarks);
    const Tensor b = preprocess_frames(moved, moved_lm);
    const int margin = 8;
    double total = 0.0;
    std::int64_t n = 0;
    for (std::int64_t t = 0; t < a.dim(0); ++t)
      for (int y = margin; y < 96 - margin; ++y)
        for (int x = margin; x < 96 - margin; ++x) {
          const std::int64_t i = (t * 96 + y) * 96 + x;
          total += std::abs(a[i] - b[i]);
          ++n;
        }
    const double mad = total / static_cast<double>(n);
    std::printf("global similarity: scale %.3f angle %.3f mean abs diff %.5f (x255 = %.3f)\n", scale, angle, mad,
                mad * 255);
    EXPECT_LE(mad, 2.0 / 255.0);
  }
}

TEST(Clips, CountsFollowStride) {
  EXPECT_EQ(make_clips(Tensor(Shape{110, 2, 2, 1}), 25, 25).dim(0), 4);
  EXPECT_EQ(make_clips(Tensor(Shape{24, 2, 2, 1}), 25, 25).dim(0), 0);
  EXPECT_EQ(make_clips(Tensor(Shape{25, 2, 2, 1}), 25, 25).dim(0), 1);
  EXPECT_EQ(make_clips(Tensor(Shape{30, 2, 2, 1}), 25, 1).dim(0), 6);
}

TEST(Clips, WindowsCopyFrames) {
  Tensor frames(Shape{7, 1, 1, 1});
  for (int i = 0; i < 7; ++i) frames[i] = static_cast<float>(i);
  const Tensor clips = make_clips(frames, 3, 2);
  ASSERT_EQ(clips.shape(), (Shape{3, 3, 1, 1, 1}));
  const float expected[9] = {0, 1, 2, 2, 3, 4, 4, 5, 6};
  for (int i = 0; i < 9; ++i) EXPECT_EQ(clips[i], expected[i]);
}

// ---------------------------------------------------------------------------
// Files.

TEST(Files, ImageRoundTrips) {
  const fs::path dir = scratch_dir("images");
  const Image rgb = random_image(13, 7, 8);
  for (const char* name : {"a.png", "a.ppm"}) {
    write_image(dir / name, rgb);
    EXPECT_EQ(read_image(dir / name), rgb) << name;
  }
  Image gray(9, 5, 1);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) gray.pixels[i] = static_cast<std::uint8_t>(i * 5);
  for (const char* name : {"g.png", "g.pgm"}) {
    write_image(dir / name, gray);
    EXPECT_EQ(read_image(dir / name), gray) << name;
  }
  EXPECT_THROW(read_image(dir / "missing.png"), DataError);
  std::ofstream(dir / "junk.png") << "not an image";
  EXPECT_THROW(read_image(dir / "junk.png"), FormatError);
}

TEST(Files, LandmarkRoundTrip) {
  const fs::path dir = scratch_dir("landmarks");
  LandmarkTrack track(3);
  Rng rng(4);
  for (auto& lm : track)
    for (auto& p : lm) p = {rng.uniform() * 100, rng.uniform() * 100};
  write_landmarks(dir / "l.json", track);
  const auto back = read_landmarks(dir / "l.json");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t t = 0; t < 3; ++t)
    for (int i = 0; i < kLandmarkCount; ++i) {
      EXPECT_EQ(back[t][i].x, track[t][i].x);
      EXPECT_EQ(back[t][i].y, track[t][i].y);
    }
  std::ofstream(dir / "short.json") << "[[[1,2],[3,4]]]";
  EXPECT_THROW(read_landmarks(dir / "short.json"), FormatError);
}

TEST(Files, ManifestValidation) {
  const fs::path dir = scratch_dir("manifest");
  const std::string good =
      R"({"videoId":"a","framesPath":"f","landmarksPath":"l.json","label":"real","method":"original","dataset":"d","split":"train"})";
  std::ofstream(dir / "ok.jsonl") << good << "\n";
  const Manifest m = read_manifest(dir / "ok.jsonl", false);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].label, 0);
  EXPECT_EQ(m.resolve("f"), dir / "f");

  std::ofstream(dir / "dup.jsonl") << good << "\n" << good << "\n";
  EXPECT_THROW(read_manifest(dir / "dup.jsonl", false), DataError);

  std::string extra = good;
  extra.insert(1, R"("colour":"blue",)");
  std::ofstream(dir / "extra.jsonl") << extra << "\n";
  EXPECT_THROW(read_manifest(dir / "extra.jsonl", false), DataError);

  std::string bad_label = good;
  bad_label.replace(bad_label.find("real"), 4, "maybe");
  std::ofstream(dir / "label.jsonl") << bad_label << "\n";
  EXPECT_THROW(read_manifest(dir / "label.jsonl", false), DataError);

  EXPECT_THROW(read_manifest(dir / "ok.jsonl", true), DataError);  // paths missing
}

TEST(Files, ClipCacheRoundTrip) {
  const fs::path dir = scratch_dir("cache");
  Tensor frames(Shape{30, 96, 96, 1});
  Rng rng(6);
  for (auto& v : frames.data()) v = rng.uniform_float();
  save_clip_cache(dir / "v.lfw", frames, 25, 5);
  const Tensor back = load_cached_frames(dir / "v.lfw");
  ASSERT_EQ(back.shape(), frames.shape());
  for (std::size_t i = 0; i < frames.data().size(); ++i) ASSERT_EQ(back[i], frames[i]);
  EXPECT_EQ(load_cached_clips(dir / "v.lfw").dim(0), 2);
}

TEST(Files, PreprocessCorpusEndToEnd) {
  const fs::path dir = scratch_dir("corpus");
  const synth::SynthConfig cfg{.num_videos = 4, .frames_per_video = 26, .seed = 5};
  const auto videos = synth::gen_forgery(cfg);
  synth::write_corpus(videos, synth::assign_splits(videos, 0.5, 5), "toy", dir / "raw", false);
  const Manifest raw = read_manifest(dir / "raw" / "manifest.jsonl");
  ASSERT_EQ(raw.entries.size(), 4u);
  const Manifest done = preprocess_manifest(raw, dir / "pre", {});
  write_manifest(dir / "pre" / "manifest.jsonl", done);
  const Manifest again = read_manifest(dir / "pre" / "manifest.jsonl");
  for (std::size_t i = 0; i < again.entries.size(); ++i) {
    const Tensor cached = load_cached_frames(again.resolve(again.entries[i].clips_path));
    const Tensor direct = preprocess_frames(videos[i].frames, videos[i].landmarks);
    ASSERT_EQ(cached.shape(), direct.shape());
    for (std::size_t k = 0; k < direct.data().size(); ++k) ASSERT_EQ(cached[k], direct[k]);
    EXPECT_EQ(load_cached_clips(again.resolve(again.entries[i].clips_path)).dim(0), 1);
  }
}
