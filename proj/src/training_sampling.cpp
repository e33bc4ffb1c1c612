#include "mouthtrace/training/sampling.hpp"

#include <algorithm>
#include <string>

namespace mouthtrace::training {

std::vector<std::size_t> oversample_epoch(const std::vector<int>& labels, Rng& rng) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y != 0 && y != 1) throw DataError("oversample_epoch: label " + std::to_string(y) + " is not 0 or 1");
    by_class[y].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) throw DataError("oversample_epoch: a class is absent");
  const std::size_t target = std::max(by_class[0].size(), by_class[1].size());
  std::vector<std::size_t> order;
  order.reserve(2 * target);
  for (const auto& members : by_class) {
    order.insert(order.end(), members.begin(), members.end());
    for (std::size_t k = members.size(); k < target; ++k) order.push_back(members[rng.below(members.size())]);
  }
  shuffle(order, rng);
  return order;
}

CropParams draw_crop(std::int64_t height, std::int64_t width, Rng& rng, bool train) {
  if (height < kCropSize || width < kCropSize) {
    throw ShapeError("augment: frames of " + std::to_string(height) + "x" + std::to_string(width) +
                     " are smaller than the 88x88 crop");
  }
  CropParams p;
  if (!train) {
    p.top = (height - kCropSize) / 2;
    p.left = (width - kCropSize) / 2;
    return p;
  }
  p.top = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(height - kCropSize + 1)));
  p.left = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(width - kCropSize + 1)));
  p.flip = rng.bernoulli(0.5);
  return p;
}

Tensor crop_clip(const Tensor& clip, const CropParams& params) {
  const Shape& s = clip.shape();
  if (s.size() != 4) throw ShapeError("crop_clip expects [T, H, W, C], got " + shape_string(s));
  const std::int64_t T = s[0], H = s[1], W = s[2], C = s[3];
  if (params.top < 0 || params.left < 0 || params.top + kCropSize > H || params.left + kCropSize > W) {
    throw ShapeError("crop window outside a " + std::to_string(H) + "x" + std::to_string(W) + " frame");
  }
  Tensor out(Shape{T, kCropSize, kCropSize, C});
  for (std::int64_t t = 0; t < T; ++t)
    for (std::int64_t y = 0; y < kCropSize; ++y)
      for (std::int64_t x = 0; x < kCropSize; ++x) {
        const std::int64_t sx = params.flip ? params.left + kCropSize - 1 - x : params.left + x;
        const float* src = clip.ptr() + ((t * H + params.top + y) * W + sx) * C;
        std::copy_n(src, C, out.ptr() + ((t * kCropSize + y) * kCropSize + x) * C);
      }
  return out;
}

Tensor augment(const Tensor& clip96, Rng& rng, bool train) {
  if (clip96.rank() != 4) throw ShapeError("augment expects [T, H, W, C], got " + shape_string(clip96.shape()));
  return crop_clip(clip96, draw_crop(clip96.dim(1), clip96.dim(2), rng, train));
}

Tensor hflip(const Tensor& clip) {
  const Shape& s = clip.shape();
  if (s.size() != 4) throw ShapeError("hflip expects [T, H, W, C], got " + shape_string(s));
  Tensor out(s);
  const std::int64_t rows = s[0] * s[1], W = s[2], C = s[3];
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t x = 0; x < W; ++x)
      std::copy_n(clip.ptr() + (r * W + x) * C, C, out.ptr() + (r * W + (W - 1 - x)) * C);
  return out;
}

}  // namespace mouthtrace::training
