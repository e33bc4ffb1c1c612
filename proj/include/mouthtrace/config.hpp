#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mouthtrace/eval/probe.hpp"
#include "mouthtrace/eval/protocols.hpp"
#include "mouthtrace/eval/scoring.hpp"
#include "mouthtrace/nn/model.hpp"
#include "mouthtrace/preprocess/pipeline.hpp"
#include "mouthtrace/synth/synthetic.hpp"
#include "mouthtrace/training/trainer.hpp"

namespace mouthtrace {

/// Everything a CLI run can be configured with. JSON keys are camelCase;
/// every object rejects unknown keys.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  int threads = 0;

  std::string model_preset = "desk";  // desk | full
  nn::ModelConfig model = nn::ModelConfig::desk();

  struct Synth {
    std::string mode = "forgery";  // forgery | lipreading
    std::string dataset = "synthetic";
    synth::SynthConfig config;
  } synth;

  preprocess::PreprocessRun preprocess;

  struct Train {
    std::string task = "forgery";  // forgery | lipreading
    training::FinetuneMode finetune = training::FinetuneMode::frozen;
    training::TrainConfig config;
  } train;

  struct Eval {
    std::string protocol = "plain";  // plain | cross-manipulation | robustness | clip-sweep | frame-probe
    eval::ScoreOptions score;
    std::vector<std::string> held_out;
    std::vector<std::int64_t> sweep_lengths = eval::kSweepLengths;
    eval::ProbeConfig probe;
  } eval;
};

/// Defaults overlaid with `j`. A "preset" inside "model" is applied before
/// the other model keys. Throws ConfigError on unknown keys or bad values.
RunConfig parse_run_config(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

nlohmann::json to_json(const RunConfig& config);
nlohmann::json model_to_json(const nn::ModelConfig& model);
nn::ModelConfig model_from_json(const nlohmann::json& j);

}  // namespace mouthtrace
