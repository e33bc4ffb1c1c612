#include "mouthtrace/corruptions/corruptions.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include "mouthtrace/parallel.hpp"
#include "mouthtrace/rng.hpp"

namespace mouthtrace::corruptions {

namespace {

constexpr std::uint64_t kBlockStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr int kBlockSize = 32;

std::atomic<bool> g_enabled{true};

constexpr std::array<std::array<double, 5>, 7> kSchedule{{
    {0.7, 0.55, 0.4, 0.25, 0.1},     // saturation factor
    {0.85, 0.725, 0.6, 0.475, 0.35},  // contrast factor
    {1, 2, 4, 8, 16},                 // block count
    {0.01, 0.02, 0.05, 0.1, 0.2},     // noise sigma, fraction of 255
    {0.5, 1, 2, 3, 5},                // blur sigma
    {0.5, 0.4, 0.3, 0.25, 0.2},       // pixelation factor
    {50, 35, 25, 15, 10},             // codec quality
}};

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Image saturate(const Image& in, double f) {
  Image out = in;
  const std::size_t n = static_cast<std::size_t>(in.width) * in.height;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = &in.pixels[i * 3];
    // Scaling HSV saturation at fixed hue and value moves every channel
    // toward the maximum by the same factor.
    const double v = std::max({p[0], p[1], p[2]});
    for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = to_u8(v - f * (v - p[c]));
  }
  return out;
}

Image contrast(const Image& in, double c) {
  Image out = in;
  for (std::size_t i = 0; i < in.pixels.size(); ++i) out.pixels[i] = to_u8((in.pixels[i] - 128.0) * c + 128.0);
  return out;
}

struct Block {
  int x, y;
};

std::vector<Block> block_positions(int width, int height, int count, std::uint64_t seed) {
  Rng rng = Rng(seed).substream(kBlockStream, 0);
  std::vector<Block> blocks;
  for (int k = 0; k < count; ++k) {
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, width - kBlockSize + 1))));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, height - kBlockSize + 1))));
    blocks.push_back({x, y});
  }
  return blocks;
}

Image occlude(const Image& in, const std::vector<Block>& blocks) {
  Image out = in;
  for (const auto& b : blocks)
    for (int y = b.y; y < std::min(in.height, b.y + kBlockSize); ++y)
      for (int x = b.x; x < std::min(in.width, b.x + kBlockSize); ++x)
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = 128;
  return out;
}

Image add_noise(const Image& in, double sigma, Rng rng) {
  Image out = in;
  const double s = sigma * 255.0;
  for (std::size_t i = 0; i < in.pixels.size(); ++i) out.pixels[i] = to_u8(in.pixels[i] + s * rng.normal());
  return out;
}

// Reflect-101: -1 -> 1, n -> n - 2.
int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

Image blur(const Image& in, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = in.width, h = in.height;
  std::vector<double> tmp(in.pixels.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j) acc += k[j + r] * in.at(reflect(x + j, w), y, c);
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
  Image out(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j) acc += k[j + r] * tmp[(static_cast<std::size_t>(reflect(y + j, h)) * w + x) * 3 + c];
        out.at(x, y, c) = to_u8(acc);
      }
  return out;
}

// Cell boundaries floor(i * n / cells); every pixel takes its cell's mean.
Image pixelate(const Image& in, double factor) {
  const int w = in.width, h = in.height;
  const int cw = std::max(1, static_cast<int>(std::lround(w * factor)));
  const int ch = std::max(1, static_cast<int>(std::lround(h * factor)));
  Image out(w, h, 3);
  for (int j = 0; j < ch; ++j) {
    const int y0 = static_cast<int>(static_cast<std::int64_t>(j) * h / ch);
    const int y1 = static_cast<int>(static_cast<std::int64_t>(j + 1) * h / ch);
    for (int i = 0; i < cw; ++i) {
      const int x0 = static_cast<int>(static_cast<std::int64_t>(i) * w / cw);
      const int x1 = static_cast<int>(static_cast<std::int64_t>(i + 1) * w / cw);
      double sum[3] = {0, 0, 0};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) sum[c] += in.at(x, y, c);
      const double area = static_cast<double>(x1 - x0) * (y1 - y0);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) out.at(x, y, c) = to_u8(sum[c] / area);
    }
  }
  return out;
}

constexpr int kLumaTable[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
constexpr int kChromaTable[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                  24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                  99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                  99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

std::array<double, 64> scaled_table(const int* base, int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> t{};
  for (int i = 0; i < 64; ++i) t[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return t;
}

struct DctBasis {
  double c[8][8];  // c[u][x] = alpha(u) cos((2x + 1) u pi / 16)
  DctBasis() {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        c[u][x] = (u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
  }
};

const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

// Quantize one 8x8 block in place through forward and inverse DCT.
void codec_block(double blk[8][8], const std::array<double, 64>& q) {
  const auto& B = basis().c;
  double tmp[8][8], coef[8][8];
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += B[u][y] * blk[y][x];
      tmp[u][x] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += B[v][x] * tmp[u][x];
      coef[u][v] = std::round(s / q[u * 8 + v]) * q[u * 8 + v];
    }
  for (int y = 0; y < 8; ++y)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += B[u][y] * coef[u][v];
      tmp[y][v] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += B[v][x] * tmp[y][v];
      blk[y][x] = s;
    }
}

}  // namespace

Kind parse_kind(const std::string& name) {
  for (Kind k : kAllKinds)
    if (name == kind_name(k)) return k;
  throw ConfigError("unknown corruption kind '" + name +
                    "' (saturation, contrast, block, noise, blur, pixelation, compression)");
}

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::saturation: return "saturation";
    case Kind::contrast: return "contrast";
    case Kind::block: return "block";
    case Kind::noise: return "noise";
    case Kind::blur: return "blur";
    case Kind::pixelation: return "pixelation";
    case Kind::compression: return "compression";
  }
  return "unknown";
}

void CorruptionSpec::validate() const {
  if (severity < 1 || severity > kSeverities) throw ConfigError("severity must be in 1..5, got " + std::to_string(severity));
  if (external_encoder) {
    if (kind != Kind::compression) throw ConfigError("an external encoder only applies to compression");
    throw ConfigError("external H.264 encoding is not available in this build; use the built-in codec");
  }
}

double severity_parameter(Kind kind, int severity) {
  if (severity < 1 || severity > kSeverities) throw ConfigError("severity must be in 1..5, got " + std::to_string(severity));
  return kSchedule[static_cast<std::size_t>(kind)][static_cast<std::size_t>(severity - 1)];
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("blur sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;
  return k;
}

Image dct_codec(const Image& in, int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("codec quality must be in 1..100");
  const auto ql = scaled_table(kLumaTable, quality);
  const auto qc = scaled_table(kChromaTable, quality);
  const int w = in.width, h = in.height;
  std::vector<double> planes[3];
  for (auto& p : planes) p.resize(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < planes[0].size(); ++i) {
    const double r = in.pixels[i * 3], g = in.pixels[i * 3 + 1], b = in.pixels[i * 3 + 2];
    planes[0][i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
    planes[1][i] = -0.168736 * r - 0.331264 * g + 0.5 * b;
    planes[2][i] = 0.5 * r - 0.418688 * g - 0.081312 * b;
  }
  for (int c = 0; c < 3; ++c) {
    const auto& q = c == 0 ? ql : qc;
    for (int by = 0; by < h; by += 8)
      for (int bx = 0; bx < w; bx += 8) {
        double blk[8][8];
        // Partial edge blocks replicate the last row and column.
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            blk[y][x] = planes[c][static_cast<std::size_t>(std::min(by + y, h - 1)) * w + std::min(bx + x, w - 1)];
        codec_block(blk, q);
        for (int y = 0; y < 8 && by + y < h; ++y)
          for (int x = 0; x < 8 && bx + x < w; ++x) planes[c][static_cast<std::size_t>(by + y) * w + bx + x] = blk[y][x];
      }
  }
  Image out(w, h, 3);
  for (std::size_t i = 0; i < planes[0].size(); ++i) {
    const double Y = planes[0][i] + 128.0, cb = planes[1][i], cr = planes[2][i];
    out.pixels[i * 3] = to_u8(Y + 1.402 * cr);
    out.pixels[i * 3 + 1] = to_u8(Y - 0.344136 * cb - 0.714136 * cr);
    out.pixels[i * 3 + 2] = to_u8(Y + 1.772 * cb);
  }
  return out;
}

void set_corruptions_enabled(bool enabled) { g_enabled = enabled; }
bool corruptions_enabled() { return g_enabled; }

std::vector<Image> apply_corruption(const std::vector<Image>& frames, const CorruptionSpec& spec) {
  if (!g_enabled) throw std::logic_error("corruptions are disabled");
  spec.validate();
  for (const auto& f : frames)
    if (f.channels != 3) throw ShapeError("corruptions expect RGB frames");
  const double p = severity_parameter(spec.kind, spec.severity);
  std::vector<Block> blocks;
  if (spec.kind == Kind::block && !frames.empty())
    blocks = block_positions(frames[0].width, frames[0].height, static_cast<int>(p), spec.seed);
  const Rng base(spec.seed);
  std::vector<Image> out(frames.size());
  parallel_for(static_cast<std::int64_t>(frames.size()), [&](std::int64_t t) {
    const Image& f = frames[t];
    switch (spec.kind) {
      case Kind::saturation: out[t] = saturate(f, p); break;
      case Kind::contrast: out[t] = contrast(f, p); break;
      case Kind::block: out[t] = occlude(f, blocks); break;
      case Kind::noise: out[t] = add_noise(f, p, base.substream(kNoiseStream, static_cast<std::uint64_t>(t))); break;
      case Kind::blur: out[t] = blur(f, p); break;
      case Kind::pixelation: out[t] = pixelate(f, p); break;
      case Kind::compression: out[t] = dct_codec(f, static_cast<int>(p)); break;
    }
  });
  return out;
}

double psnr(const Image& a, const Image& b) { return psnr(std::vector<Image>{a}, std::vector<Image>{b}); }

double psnr(const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() != b.size()) throw ShapeError("psnr: videos have different frame counts");
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].width != b[t].width || a[t].height != b[t].height || a[t].channels != b[t].channels)
      throw ShapeError("psnr: frame shapes differ");
    for (std::size_t i = 0; i < a[t].pixels.size(); ++i) {
      const double d = static_cast<double>(a[t].pixels[i]) - b[t].pixels[i];
      se += d * d;
    }
    n += a[t].pixels.size();
  }
  if (n == 0) throw ShapeError("psnr of empty videos");
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / (se / static_cast<double>(n)));
}

double mean_frame_psnr(const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("mean_frame_psnr: frame counts differ or are zero");
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) total += psnr(a[t], b[t]);
  return total / static_cast<double>(a.size());
}

}  // namespace mouthtrace::corruptions
