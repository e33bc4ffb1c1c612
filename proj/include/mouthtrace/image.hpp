#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mouthtrace/error.hpp"

namespace mouthtrace {

/// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

/// Float image with the same layout; values on the 0..255 scale.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> pixels;

  FloatImage() = default;
  FloatImage(int w, int h, int c, float fill = 0.0f);

  float& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

/// Reads PNG (8-bit gray, gray+alpha, RGB or RGBA), binary PPM (P6) or PGM
/// (P5). Alpha is dropped; the result has 1 or 3 channels.
Image read_image(const std::filesystem::path& path);

/// Format chosen by extension: .png, .ppm or .pgm (PGM needs 1 channel).
void write_image(const std::filesystem::path& path, const Image& image);

Image to_rgb(const Image& image);

/// Frame files of a directory (.png, .ppm, .pgm) in lexicographic order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

}  // namespace mouthtrace
