#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "mouthtrace/image.hpp"
#include "mouthtrace/nn/model.hpp"

namespace mouthtrace::eval {

/// Correct-class probability for each clip of a batch [N, T, H, W, 1].
using ProbabilityFn = std::function<std::vector<double>(const Tensor& clips)>;

struct OcclusionMap {
  int width = 0;
  int height = 0;
  int block = 40;
  float fill = 0.5f;
  std::int64_t forwards = 0;  // occluded clips evaluated
  std::vector<double> raw;      // mean probability over covering blocks
  std::vector<double> heatmap;  // raw, min-max normalized; all zeros when raw is constant
};

struct OcclusionOptions {
  int block = 40;
  float fill = 0.5f;  // mid-gray in [0, 1] input space
  std::int64_t batch_size = 16;
};

/// Slides a block x block x T cuboid over every top-left position (stride 1)
/// of a clip [T, H, W, 1]. Throws ConfigError when the block does not fit.
OcclusionMap occlusion_map(const ProbabilityFn& probability, const Tensor& clip, const OcclusionOptions& options = {});

/// Forgery-head probability of `label` (1 fake, 0 real) under the model.
ProbabilityFn model_probability(const nn::Model& model, int label);

/// Heatmap as 8-bit PGM (0..255).
void write_heatmap_pgm(const std::filesystem::path& path, const OcclusionMap& map);

/// First frame in gray with the heatmap blended into the red channel.
Image heatmap_overlay(const OcclusionMap& map, const Tensor& clip);

}  // namespace mouthtrace::eval
