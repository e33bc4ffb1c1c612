#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mouthtrace/corruptions/corruptions.hpp"
#include "mouthtrace/rng.hpp"
#include "mouthtrace/synth/synthetic.hpp"

using namespace mouthtrace;
using namespace mouthtrace::corruptions;

namespace {

std::vector<Image> probe_video(int frames = 20) {
  synth::SynthConfig c;
  c.num_videos = 2;
  c.frames_per_video = frames;
  c.seed = 77;
  return synth::gen_forgery(c)[0].frames;
}

Image gray_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(rng.below(256));
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
    }
  return img;
}

}  // namespace

TEST(Corruptions, NamesRoundTrip) {
  for (Kind k : kAllKinds) EXPECT_EQ(parse_kind(kind_name(k)), k);
  EXPECT_THROW(parse_kind("jpeg"), ConfigError);
  EXPECT_THROW(apply_corruption({}, {Kind::blur, 0}), ConfigError);
  EXPECT_THROW(apply_corruption({}, {Kind::blur, 6}), ConfigError);
  EXPECT_THROW(apply_corruption({}, {Kind::compression, 1, 0, true}), ConfigError);
  EXPECT_THROW(apply_corruption({Image(8, 8, 1)}, {Kind::blur, 1}), ShapeError);
}

TEST(Corruptions, EveryCellIsDeterministic) {
  const auto video = probe_video(4);
  for (Kind k : kAllKinds)
    for (int s = 1; s <= kSeverities; ++s) {
      const CorruptionSpec spec{k, s, 1234};
      const auto a = apply_corruption(video, spec);
      const auto b = apply_corruption(video, spec);
      ASSERT_EQ(a, b) << kind_name(k) << " " << s;
      ASSERT_EQ(a.size(), video.size());
      EXPECT_NE(a, video) << kind_name(k) << " " << s;
    }
}

TEST(Corruptions, SeedChangesStochasticKinds) {
  const auto video = probe_video(2);
  EXPECT_NE(apply_corruption(video, {Kind::noise, 3, 1}), apply_corruption(video, {Kind::noise, 3, 2}));
  EXPECT_NE(apply_corruption(video, {Kind::block, 3, 1}), apply_corruption(video, {Kind::block, 3, 2}));
}

TEST(Corruptions, MeanPsnrNonIncreasingInSeverity) {
  const auto video = probe_video(20);
  for (Kind k : kAllKinds) {
    double prev = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= kSeverities; ++s) {
      const double p = mean_frame_psnr(video, apply_corruption(video, {k, s, 5}));
      std::printf("%-12s severity %d  mean PSNR %.3f dB\n", kind_name(k), s, p);
      EXPECT_LE(p, prev) << kind_name(k) << " severity " << s;
      prev = p;
    }
  }
}

TEST(Corruptions, SaturationFixesGray) {
  const std::vector<Image> gray{gray_image(40, 30, 1), gray_image(40, 30, 2)};
  for (int s = 1; s <= kSeverities; ++s) EXPECT_EQ(apply_corruption(gray, {Kind::saturation, s}), gray);
}

TEST(Corruptions, SaturationScalesHsvSaturation) {
  Image img(1, 1, 3);
  img.at(0, 0, 0) = 200;
  img.at(0, 0, 1) = 100;
  img.at(0, 0, 2) = 50;
  const Image out = apply_corruption({img}, {Kind::saturation, 3})[0];  // factor 0.4
  // S = (200 - 50) / 200 = 0.75 -> 0.3 with V = 200 and hue kept.
  EXPECT_EQ(out.at(0, 0, 0), 200);
  EXPECT_EQ(out.at(0, 0, 1), 160);  // 200 - 0.4 * 100
  EXPECT_EQ(out.at(0, 0, 2), 140);  // 200 - 0.4 * 150
}

TEST(Corruptions, ContrastFixesMidGray) {
  const std::vector<Image> flat{Image(16, 16, 3, 128)};
  for (int s = 1; s <= kSeverities; ++s) EXPECT_EQ(apply_corruption(flat, {Kind::contrast, s}), flat);
  const Image dark = apply_corruption({Image(2, 2, 3, 28)}, {Kind::contrast, 5})[0];
  EXPECT_EQ(dark.pixels[0], 93);  // (28 - 128) * 0.35 + 128
}

TEST(Corruptions, BlocksAreMidGrayAndStable) {
  std::vector<Image> video(3, Image(96, 96, 3, 0));
  const auto out = apply_corruption(video, {Kind::block, 5, 9});
  for (std::size_t t = 1; t < out.size(); ++t) EXPECT_EQ(out[t], out[0]);
  std::size_t gray = 0;
  for (auto p : out[0].pixels) {
    EXPECT_TRUE(p == 0 || p == 128);
    gray += p == 128;
  }
  EXPECT_GE(gray, 32u * 32u * 3u);
  // Lower severities use a prefix of the same block sequence.
  const auto lower = apply_corruption(video, {Kind::block, 2, 9});
  for (std::size_t i = 0; i < lower[0].pixels.size(); ++i)
    if (lower[0].pixels[i] == 128) ASSERT_EQ(out[0].pixels[i], 128);
}

TEST(Corruptions, NoiseIsFreshPerFrame) {
  const std::vector<Image> video(2, Image(32, 32, 3, 128));
  const auto out = apply_corruption(video, {Kind::noise, 4, 3});
  EXPECT_NE(out[0], out[1]);
}

TEST(Corruptions, NoisePsnrMatchesClosedForm) {
  const std::vector<Image> video(4, Image(64, 64, 3, 128));
  for (int s = 1; s <= 4; ++s) {  // severity 5 would clip
    const double sigma = severity_parameter(Kind::noise, s) * 255.0;
    const double expected = 10.0 * std::log10(255.0 * 255.0 / (sigma * sigma + 1.0 / 12.0));
    EXPECT_NEAR(psnr(video, apply_corruption(video, {Kind::noise, s, 8})), expected, 0.5) << s;
  }
}

TEST(Corruptions, GaussianKernelOracle) {
  const auto k = gaussian_kernel(2.0);
  ASSERT_EQ(k.size(), 13u);
  double total = 0.0;
  for (int i = -6; i <= 6; ++i) total += std::exp(-i * i / 8.0);
  for (int i = -6; i <= 6; ++i) EXPECT_NEAR(k[i + 6], std::exp(-i * i / 8.0) / total, 1e-15);
  EXPECT_EQ(gaussian_kernel(0.5).size(), 5u);
  EXPECT_EQ(gaussian_kernel(5.0).size(), 31u);
}

TEST(Corruptions, BlurOfImpulseIsKernel) {
  Image img(41, 41, 3, 0);
  for (int c = 0; c < 3; ++c) img.at(20, 20, c) = 255;
  const Image out = apply_corruption({img}, {Kind::blur, 3})[0];  // sigma 2
  const auto k = gaussian_kernel(2.0);
  for (int y = 14; y <= 26; ++y)
    for (int x = 14; x <= 26; ++x)
      EXPECT_EQ(out.at(x, y, 1), static_cast<std::uint8_t>(std::lround(255.0 * k[x - 14] * k[y - 14])));
}

TEST(Corruptions, BlurUsesReflectPadding) {
  // An impulse on the border reflects without duplicating the edge pixel.
  Image img(20, 1, 3, 0);
  for (int c = 0; c < 3; ++c) img.at(0, 0, c) = 200;
  const Image out = apply_corruption({img}, {Kind::blur, 2})[0];  // sigma 1, radius 3
  const auto k = gaussian_kernel(1.0);
  EXPECT_EQ(out.at(0, 0, 0), std::lround(200.0 * k[3]));
  EXPECT_EQ(out.at(1, 0, 0), std::lround(200.0 * k[2]));
}

TEST(Corruptions, PixelationAveragesCells) {
  Image img(4, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(10 * (y * 4 + x));
  const Image out = apply_corruption({img}, {Kind::pixelation, 1})[0];  // 2x2 cells
  EXPECT_EQ(out.at(0, 0, 0), 25);  // mean of 0, 10, 40, 50
  EXPECT_EQ(out.at(1, 1, 0), 25);
  EXPECT_EQ(out.at(3, 3, 0), 125);
}

TEST(Corruptions, CodecNearLosslessAtTopQuality) {
  for (const auto& f : probe_video(2)) EXPECT_GT(psnr(f, dct_codec(f, 100)), 40.0);
  // Flat content stays flat (only DC is coded); mid-gray has a zero DC term.
  const Image flat = dct_codec(Image(17, 9, 3, 90), 10);
  for (auto p : flat.pixels) EXPECT_EQ(p, flat.pixels[0]);
  EXPECT_EQ(dct_codec(Image(17, 9, 3, 128), 10), Image(17, 9, 3, 128));
}

TEST(Psnr, Examples) {
  const Image a(8, 8, 3, 0), b(8, 8, 3, 255);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(psnr(a, b), 0.0, 1e-12);
  EXPECT_THROW(psnr(a, Image(4, 4, 3)), ShapeError);
  EXPECT_THROW(psnr(std::vector<Image>{a}, std::vector<Image>{a, a}), ShapeError);
}
