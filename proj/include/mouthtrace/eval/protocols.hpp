#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mouthtrace/corruptions/corruptions.hpp"
#include "mouthtrace/eval/metrics.hpp"
#include "mouthtrace/eval/probe.hpp"
#include "mouthtrace/eval/scoring.hpp"
#include "mouthtrace/preprocess/pipeline.hpp"

namespace mouthtrace::eval {

// ---------------------------------------------------------------------------
// Plain: score every video, AUC when both classes are present.

struct PlainReport {
  ScoreOptions options;
  std::vector<VideoScore> videos;
  std::optional<double> auc;
  double accuracy = 0.0;
};

PlainReport protocol_plain(const nn::Model& model, const std::vector<training::VideoSample>& videos,
                           const ScoreOptions& options = {});

// ---------------------------------------------------------------------------
// Cross-manipulation: train without one fake method, test on it.

/// Trains a fresh model on the given videos.
using TrainFn = std::function<std::shared_ptr<nn::Model>(const std::vector<training::VideoSample>& train)>;

struct CrossManipulationRow {
  std::string held_out;
  double auc = 0.0;
  std::int64_t train_videos = 0;
  std::int64_t test_videos = 0;
};

struct CrossManipulationReport {
  std::vector<CrossManipulationRow> rows;
  double average = 0.0;
};

/// Fake methods found in `train` and `test` (label 1), sorted.
std::vector<std::string> fake_methods(const std::vector<training::VideoSample>& train,
                                      const std::vector<training::VideoSample>& test);

/// One row per held-out method: trains on the train reals plus every other
/// fake method, scores the test reals plus the held-out fakes. An empty
/// `held_out` list means every method. Needs at least two methods; a held-out
/// method without test fakes is a DataError.
CrossManipulationReport protocol_cross_manipulation(const std::vector<training::VideoSample>& train,
                                                    const std::vector<training::VideoSample>& test,
                                                    const std::vector<std::string>& held_out, const TrainFn& trainer,
                                                    const ScoreOptions& options = {});

// ---------------------------------------------------------------------------
// Robustness: corrupt the raw frames, preprocess with the clean landmarks,
// score.

struct RawVideo {
  std::string id;
  int label = 0;
  std::string method;
  std::vector<Image> frames;
  preprocess::LandmarkTrack landmarks;
};

using CorruptFn =
    std::function<std::vector<Image>(const std::vector<Image>& frames, const corruptions::CorruptionSpec& spec)>;

struct RobustnessReport {
  double clean = 0.0;
  std::array<std::array<double, corruptions::kSeverities>, corruptions::kAllKinds.size()> cells{};
  std::array<double, corruptions::kAllKinds.size()> kind_mean{};
  double average = 0.0;  // mean of the per-kind means
};

/// Video v is corrupted with a seed drawn from (seed, v), the same for every
/// cell, so severities of one kind share block positions and noise fields.
RobustnessReport protocol_robustness(const nn::Model& model, const std::vector<RawVideo>& videos, std::uint64_t seed,
                                     const ScoreOptions& options = {},
                                     const preprocess::PreprocessOptions& preprocess_options = {},
                                     const CorruptFn& corrupt = corruptions::apply_corruption);

// ---------------------------------------------------------------------------
// Clip sweep: video AUC when scoring with different clip lengths.

struct ClipSweepRow {
  std::int64_t clip_length = 0;
  std::int64_t clips = 0;
  double auc = 0.0;
};

inline const std::vector<std::int64_t> kSweepLengths{5, 10, 15, 20, 25, 30};

std::vector<ClipSweepRow> protocol_clip_sweep(const nn::Model& model, const std::vector<training::VideoSample>& videos,
                                              const std::vector<std::int64_t>& lengths = kSweepLengths,
                                              std::int64_t batch_size = 16);

// ---------------------------------------------------------------------------
// Reports. Keys are sorted, so equal reports serialize to equal bytes.

nlohmann::json to_json(const VideoScore& v);
nlohmann::json to_json(const PlainReport& r);
nlohmann::json to_json(const CrossManipulationReport& r);
nlohmann::json to_json(const RobustnessReport& r);
nlohmann::json to_json(const std::vector<ClipSweepRow>& rows);
nlohmann::json to_json(const ProbeResult& r);

/// Aligned text table for humans.
std::string format_table(const RobustnessReport& r);
std::string format_table(const CrossManipulationReport& r);

void write_json(const std::filesystem::path& path, const nlohmann::json& report);

}  // namespace mouthtrace::eval
