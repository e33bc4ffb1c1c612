#pragma once

#include <cstdint>
#include <vector>

#include "mouthtrace/training/trainer.hpp"

namespace mouthtrace::eval {

/// Single-frame baseline: logistic regression on block-averaged pixels of
/// individual aligned frames. It sees no temporal context, so it bounds how
/// much of a forgery signal is visible in single frames.
struct ProbeConfig {
  int downsample = 4;  // 96x96 -> 24x24 features
  int iterations = 500;
  double l2 = 1e-3;
};

struct FrameProbe {
  int downsample = 4;
  std::vector<double> mean, inv_std, weights;
  double bias = 0.0;

  /// Fake probability for every frame of [F, 96, 96, 1].
  std::vector<double> predict(const Tensor& frames) const;
};

FrameProbe train_frame_probe(const std::vector<training::VideoSample>& train, const ProbeConfig& config = {});

struct ProbeResult {
  std::int64_t train_frames = 0;
  std::int64_t test_frames = 0;
  double train_frame_auc = 0.0;
  double test_frame_auc = 0.0;
  double test_video_auc = 0.0;  // frame probabilities averaged per video
};

ProbeResult run_frame_probe(const std::vector<training::VideoSample>& train,
                            const std::vector<training::VideoSample>& test, const ProbeConfig& config = {});

}  // namespace mouthtrace::eval
