#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mouthtrace/config.hpp"

namespace mouthtrace::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 4;

int run_synth(const RunConfig& config, const fs::path& out);
int run_preprocess(const RunConfig& config, const fs::path& manifest, const fs::path& out);

struct TrainArgs {
  fs::path manifest;
  fs::path checkpoint;
  fs::path pretrained;  // empty unless finetuning
  fs::path log;         // empty: <checkpoint>.log.jsonl
};
int run_train(const RunConfig& config, const TrainArgs& args);

struct EvalArgs {
  fs::path checkpoint;  // unused by frame-probe
  fs::path pretrained;  // cross-manipulation starting weights
  fs::path manifest;
  fs::path out;
};
int run_eval(const RunConfig& config, const EvalArgs& args);

struct CorruptArgs {
  std::string kind;
  int severity = 1;
  std::uint64_t seed = 0;
  fs::path in;
  fs::path out;
};
int run_corrupt(const CorruptArgs& args);

struct OccludeArgs {
  fs::path checkpoint;
  fs::path clips;
  std::int64_t index = 0;
  int label = 1;
  int block = 40;
  fs::path out;      // heatmap .pgm
  fs::path overlay;  // empty: <out stem>_overlay.png
};
int run_occlude(const OccludeArgs& args);

int run_gradcheck(int instances, std::uint64_t seed, double tolerance);
int run_params(const RunConfig& config);

/// <checkpoint>.config.json: the model config and run config a checkpoint
/// was trained with.
fs::path sidecar_path(const fs::path& checkpoint);

}  // namespace mouthtrace::cli
