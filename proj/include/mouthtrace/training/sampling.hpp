#pragma once

#include <cstdint>
#include <vector>

#include "mouthtrace/rng.hpp"

namespace mouthtrace::training {

/// Class-balanced epoch order for binary labels. Every sample appears at
/// least once; the minority class is topped up with draws (with replacement)
/// until both classes have the majority count. The result is shuffled.
std::vector<std::size_t> oversample_epoch(const std::vector<int>& labels, Rng& rng);

inline constexpr std::int64_t kCropSize = 88;

struct CropParams {
  std::int64_t top = 0;
  std::int64_t left = 0;
  bool flip = false;
};

/// Train: offsets uniform over [0, H-88] x [0, W-88] and a flip with p = 0.5.
/// Eval: the centre window, no flip.
CropParams draw_crop(std::int64_t height, std::int64_t width, Rng& rng, bool train);

/// [T, H, W, C] -> [T, 88, 88, C] with one window for all frames, mirrored
/// horizontally when params.flip.
Tensor crop_clip(const Tensor& clip, const CropParams& params);

Tensor augment(const Tensor& clip96, Rng& rng, bool train);

Tensor hflip(const Tensor& clip);

}  // namespace mouthtrace::training
