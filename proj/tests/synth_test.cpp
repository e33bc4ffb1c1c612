#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>

#include "mouthtrace/synth/synthetic.hpp"

using namespace mouthtrace;
using namespace mouthtrace::synth;

namespace {

SynthConfig small(ArtefactFamily family, double strength, std::uint64_t seed = 3) {
  SynthConfig c;
  c.num_videos = 8;
  c.frames_per_video = 12;
  c.family = family;
  c.strength = strength;
  c.seed = seed;
  return c;
}

std::array<double, 256> histogram(const std::vector<SynthVideo>& videos, int label) {
  std::array<double, 256> h{};
  double n = 0.0;
  for (const auto& v : videos) {
    if (v.label != label) continue;
    for (const auto& f : v.frames)
      for (auto p : f.pixels) {
        h[p] += 1.0;
        n += 1.0;
      }
  }
  for (auto& x : h) x /= n;
  return h;
}

}  // namespace

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.strength = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SynthConfig{};
  c.vocab = 1;
  EXPECT_THROW(gen_lipreading(c), ConfigError);
  c = SynthConfig{};
  c.num_videos = 3;
  EXPECT_THROW(gen_forgery(c), ConfigError);
  EXPECT_EQ(parse_family("shape_flicker"), ArtefactFamily::shape_flicker);
  EXPECT_THROW(parse_family("wobble"), ConfigError);
}

TEST(Synth, RegenerationIsBitwiseIdentical) {
  for (auto family : {ArtefactFamily::jitter, ArtefactFamily::shape_flicker, ArtefactFamily::incomplete_close}) {
    const auto a = gen_forgery(small(family, 1.0));
    const auto b = gen_forgery(small(family, 1.0));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].frames, b[i].frames);
      for (std::size_t t = 0; t < a[i].landmarks.size(); ++t)
        for (int k = 0; k < preprocess::kLandmarkCount; ++k) ASSERT_EQ(a[i].landmarks[t][k].x, b[i].landmarks[t][k].x);
    }
  }
  SynthConfig lc;
  lc.num_videos = 4;
  lc.frames_per_video = 6;
  lc.seed = 9;
  const auto a = gen_lipreading(lc);
  const auto b = gen_lipreading(lc);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].frames, b[i].frames);
}

TEST(Synth, DifferentSeedsDiffer) {
  const auto a = gen_forgery(small(ArtefactFamily::jitter, 1.0, 1));
  const auto b = gen_forgery(small(ArtefactFamily::jitter, 1.0, 2));
  EXPECT_NE(a[0].frames[0], b[0].frames[0]);
}

TEST(Synth, PairsShareSourceAndLabels) {
  const auto v = gen_forgery(small(ArtefactFamily::jitter, 1.0));
  ASSERT_EQ(v.size(), 8u);
  std::set<std::string> ids;
  for (std::size_t k = 0; k < v.size(); k += 2) {
    EXPECT_EQ(v[k].label, 0);
    EXPECT_EQ(v[k + 1].label, 1);
    EXPECT_EQ(v[k].source, v[k + 1].source);
    EXPECT_EQ(v[k].method, "original");
    EXPECT_EQ(v[k + 1].method, "jitter");
    ids.insert(v[k].id);
    ids.insert(v[k + 1].id);
    EXPECT_EQ(v[k].frames.size(), 12u);
    EXPECT_EQ(v[k].landmarks.size(), 12u);
    EXPECT_EQ(v[k].frames[0].width, 128);
  }
  EXPECT_EQ(ids.size(), 8u);
}

TEST(Synth, ZeroStrengthFakesEqualReals) {
  for (auto family : {ArtefactFamily::jitter, ArtefactFamily::shape_flicker, ArtefactFamily::incomplete_close}) {
    const auto v = gen_forgery(small(family, 0.0));
    for (std::size_t k = 0; k < v.size(); k += 2) {
      EXPECT_EQ(v[k].frames, v[k + 1].frames) << family_name(family);
      EXPECT_EQ(v[k].aperture, v[k + 1].aperture);
    }
  }
}

TEST(Synth, ArtefactsChangeOnlyTheMouthTrajectory) {
  const auto v = gen_forgery(small(ArtefactFamily::jitter, 1.0));
  int differing = 0;
  for (std::size_t k = 0; k < v.size(); k += 2) {
    EXPECT_NE(v[k].aperture, v[k + 1].aperture);
    for (std::size_t t = 0; t < v[k].frames.size(); ++t) {
      // Eye landmarks do not depend on the mouth, so they match exactly.
      for (int i = 36; i <= 47; ++i) ASSERT_EQ(v[k].landmarks[t][i].x, v[k + 1].landmarks[t][i].x);
      differing += v[k].frames[t] != v[k + 1].frames[t];
    }
  }
  EXPECT_GT(differing, 0);
}

TEST(Synth, IncompleteCloseNeverCloses) {
  const auto v = gen_forgery(small(ArtefactFamily::incomplete_close, 1.0));
  bool real_closes = false;
  for (const auto& x : v)
    for (double a : x.aperture) {
      if (x.label == 1) EXPECT_GE(a, 4.0);
      if (x.label == 0 && a == 0.0) real_closes = true;
    }
  EXPECT_TRUE(real_closes);
}

TEST(Synth, LipreadingClassesAndNoise) {
  SynthConfig c;
  c.num_videos = 8;
  c.frames_per_video = 30;
  c.vocab = 4;
  c.seed = 4;
  const auto v = gen_lipreading(c);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i].label, static_cast<int>(i % 4));
  // Same class: same frequency, different phase and pixels.
  EXPECT_EQ(v[0].label, v[4].label);
  EXPECT_NE(v[0].frames[0], v[4].frames[0]);
  // Higher word index means a faster cycle: count upward crossings of the mid level.
  auto crossings = [](const std::vector<double>& a) {
    const double mid = 0.5 * (*std::max_element(a.begin(), a.end()));
    int n = 0;
    for (std::size_t t = 1; t < a.size(); ++t) n += a[t - 1] < mid && a[t] >= mid;
    return n;
  };
  EXPECT_LT(crossings(v[0].aperture), crossings(v[3].aperture));
}

// The artefact is temporal: intensity histograms of real and fake frames
// agree to within 1% total variation.
TEST(Synth, JitterHistogramsMatch) {
  SynthConfig c;
  c.num_videos = 40;
  c.frames_per_video = 30;
  c.seed = 12;
  const auto v = gen_forgery(c);
  const auto real = histogram(v, 0);
  const auto fake = histogram(v, 1);
  double tv = 0.0;
  for (int i = 0; i < 256; ++i) tv += 0.5 * std::abs(real[i] - fake[i]);
  std::printf("jitter histogram total variation %.5f\n", tv);
  EXPECT_LE(tv, 0.01);
}

TEST(Synth, SplitsKeepPairsTogether) {
  const auto v = gen_forgery(small(ArtefactFamily::jitter, 1.0));
  const auto splits = assign_splits(v, 0.5, 1);
  int test = 0;
  for (std::size_t k = 0; k < v.size(); k += 2) {
    EXPECT_EQ(splits[k], splits[k + 1]);
    test += splits[k] == "test";
  }
  EXPECT_EQ(test, 2);
  EXPECT_EQ(assign_splits(v, 0.5, 1), splits);
}
