#include "mouthtrace/eval/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "mouthtrace/parallel.hpp"
#include "mouthtrace/training/sampling.hpp"

namespace mouthtrace::eval {

namespace {

struct ClipRef {
  std::size_t video;
  std::int64_t start;
};

}  // namespace

double probability(double logit) {
  if (logit >= 0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

VideoScore score_video(const nn::Model& model, const training::VideoSample& video, const ScoreOptions& options) {
  return score_videos(model, {video}, options).front();
}

std::vector<VideoScore> score_videos(const nn::Model& model, const std::vector<training::VideoSample>& videos,
                                     const ScoreOptions& options) {
  if (options.batch_size < 1) throw ConfigError("scoring batch size must be positive");
  std::vector<ClipRef> clips;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto starts = training::clip_starts(videos[v].frames.dim(0), options.clip_length, options.stride);
    if (starts.empty())
      throw DataError("video " + videos[v].id + " has " + std::to_string(videos[v].frames.dim(0)) +
                      " frames, fewer than the clip length " + std::to_string(options.clip_length));
    for (auto s : starts) clips.push_back({v, s});
  }
  std::vector<double> probs(clips.size());
  const auto B = static_cast<std::size_t>(options.batch_size);
  for (std::size_t first = 0; first < clips.size(); first += B) {
    const std::size_t count = std::min(B, clips.size() - first);
    const auto& f0 = videos[clips[first].video].frames;
    Rng unused(0);
    const training::CropParams centre = training::draw_crop(f0.dim(1), f0.dim(2), unused, false);
    Tensor batch(Shape{static_cast<std::int64_t>(count), options.clip_length, training::kCropSize, training::kCropSize, 1});
    const std::int64_t each = batch.numel() / static_cast<std::int64_t>(count);
    parallel_for(static_cast<std::int64_t>(count), [&](std::int64_t i) {
      const ClipRef& c = clips[first + static_cast<std::size_t>(i)];
      const Tensor clip = training::crop_clip(training::slice_frames(videos[c.video].frames, c.start, options.clip_length), centre);
      std::copy_n(clip.ptr(), each, batch.ptr() + i * each);
    });
    const Tensor logits = model.predict(batch, nn::Head::forgery);
    for (std::size_t i = 0; i < count; ++i) probs[first + i] = probability(logits[static_cast<std::int64_t>(i)]);
  }
  std::vector<std::vector<double>> per_video(videos.size());
  for (std::size_t k = 0; k < clips.size(); ++k) per_video[clips[k].video].push_back(probs[k]);
  std::vector<VideoScore> out;
  for (std::size_t v = 0; v < videos.size(); ++v)
    out.push_back(make_video_score(videos[v].id, std::move(per_video[v]), videos[v].label, videos[v].method));
  return out;
}

double video_auc(const std::vector<VideoScore>& scores) {
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& v : scores) {
    s.push_back(v.video_score);
    y.push_back(v.label);
  }
  return roc_auc(s, y).auc;
}

}  // namespace mouthtrace::eval
