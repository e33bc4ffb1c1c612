#pragma once

#include <cstdint>
#include <vector>

#include "mouthtrace/eval/metrics.hpp"
#include "mouthtrace/nn/model.hpp"
#include "mouthtrace/training/trainer.hpp"

namespace mouthtrace::eval {

/// Numerically stable logistic function in double.
double probability(double logit);

struct ScoreOptions {
  std::int64_t clip_length = 25;
  std::int64_t stride = 25;  // non-overlapping windows by default
  std::int64_t batch_size = 16;
};

/// Clip probability sigmoid(logit) for every window of a preprocessed video
/// [F, 96, 96, 1] (centre 88x88 crop, eval mode), averaged into a video
/// score. Throws DataError when the video is shorter than one clip.
VideoScore score_video(const nn::Model& model, const training::VideoSample& video, const ScoreOptions& options = {});

/// Same as score_video for every video; clips from all videos are batched
/// together. Batch size only changes float round-off (matrix kernels pick
/// different summation orders); a fixed batch size is bitwise reproducible.
std::vector<VideoScore> score_videos(const nn::Model& model, const std::vector<training::VideoSample>& videos,
                                     const ScoreOptions& options = {});

/// AUC over video scores (labels 0 real / 1 fake).
double video_auc(const std::vector<VideoScore>& scores);

}  // namespace mouthtrace::eval
