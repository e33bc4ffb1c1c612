#include "mouthtrace/eval/occlusion.hpp"

#include <algorithm>
#include <cmath>

#include "mouthtrace/eval/scoring.hpp"
#include "mouthtrace/parallel.hpp"

namespace mouthtrace::eval {

OcclusionMap occlusion_map(const ProbabilityFn& probability, const Tensor& clip, const OcclusionOptions& options) {
  const Shape& s = clip.shape();
  if (s.size() != 4 || s[3] != 1) throw ShapeError("occlusion_map expects a clip [T, H, W, 1], got " + shape_string(s));
  const std::int64_t T = s[0], H = s[1], W = s[2];
  const int b = options.block;
  if (b < 1 || b > H || b > W)
    throw ConfigError("occlusion block " + std::to_string(b) + " does not fit a " + std::to_string(H) + "x" +
                      std::to_string(W) + " frame");
  if (options.batch_size < 1) throw ConfigError("occlusion batch size must be positive");

  const std::int64_t ny = H - b + 1, nx = W - b + 1, positions = ny * nx;
  std::vector<double> probs(static_cast<std::size_t>(positions));
  const std::int64_t frame = H * W;
  for (std::int64_t first = 0; first < positions; first += options.batch_size) {
    const std::int64_t count = std::min(options.batch_size, positions - first);
    Tensor batch(Shape{count, T, H, W, 1});
    parallel_for(count, [&](std::int64_t i) {
      const std::int64_t pos = first + i, y0 = pos / nx, x0 = pos % nx;
      float* dst = batch.ptr() + i * clip.numel();
      std::copy_n(clip.ptr(), clip.numel(), dst);
      for (std::int64_t t = 0; t < T; ++t)
        for (std::int64_t y = y0; y < y0 + b; ++y) std::fill_n(dst + t * frame + y * W + x0, b, options.fill);
    });
    const std::vector<double> p = probability(batch);
    if (static_cast<std::int64_t>(p.size()) != count) throw ShapeError("probability function returned the wrong count");
    std::copy(p.begin(), p.end(), probs.begin() + first);
  }

  OcclusionMap map;
  map.width = static_cast<int>(W);
  map.height = static_cast<int>(H);
  map.block = b;
  map.fill = options.fill;
  map.forwards = positions;
  map.raw.assign(static_cast<std::size_t>(frame), 0.0);
  // Pixel (x, y) is covered by positions x0 in [x - b + 1, x], y0 likewise.
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      double total = 0.0;
      std::int64_t n = 0;
      for (std::int64_t y0 = std::max<std::int64_t>(0, y - b + 1); y0 <= std::min(y, ny - 1); ++y0)
        for (std::int64_t x0 = std::max<std::int64_t>(0, x - b + 1); x0 <= std::min(x, nx - 1); ++x0) {
          total += probs[static_cast<std::size_t>(y0 * nx + x0)];
          ++n;
        }
      map.raw[static_cast<std::size_t>(y * W + x)] = total / static_cast<double>(n);
    }
  const auto [lo, hi] = std::minmax_element(map.raw.begin(), map.raw.end());
  map.heatmap.assign(map.raw.size(), 0.0);
  // Averages of equal probabilities can differ in the last bit; treat a
  // spread at round-off level as a constant map.
  if (*hi - *lo > 1e-12 * std::max(1.0, std::abs(*hi)))
    for (std::size_t i = 0; i < map.raw.size(); ++i) map.heatmap[i] = (map.raw[i] - *lo) / (*hi - *lo);
  return map;
}

ProbabilityFn model_probability(const nn::Model& model, int label) {
  if (label != 0 && label != 1) throw DataError("occlusion label must be 0 or 1");
  return [&model, label](const Tensor& clips) {
    const Tensor logits = model.predict(clips, nn::Head::forgery);
    std::vector<double> p(static_cast<std::size_t>(logits.dim(0)));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double fake = probability(logits[static_cast<std::int64_t>(i)]);
      p[i] = label == 1 ? fake : 1.0 - fake;
    }
    return p;
  };
}

void write_heatmap_pgm(const std::filesystem::path& path, const OcclusionMap& map) {
  Image img(map.width, map.height, 1);
  for (std::size_t i = 0; i < map.heatmap.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.heatmap[i], 0.0, 1.0) * 255.0));
  write_image(path, img);
}

Image heatmap_overlay(const OcclusionMap& map, const Tensor& clip) {
  if (clip.rank() != 4 || clip.dim(1) != map.height || clip.dim(2) != map.width)
    throw ShapeError("heatmap_overlay: clip does not match the heatmap");
  Image img(map.width, map.height, 3);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * map.width + x;
      const double g = std::clamp(static_cast<double>(clip[static_cast<std::int64_t>(i)]), 0.0, 1.0) * 255.0;
      const double h = map.heatmap[i];
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::lround(0.5 * g + 0.5 * 255.0 * h));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::lround(0.5 * g));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::lround(0.5 * g));
    }
  return img;
}

}  // namespace mouthtrace::eval
