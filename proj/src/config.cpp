#include "mouthtrace/config.hpp"

#include <fstream>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>

namespace mouthtrace {

using json = nlohmann::json;

namespace {

using Setter = std::function<void(const json&, const std::string& where)>;

void apply_fields(const json& j, const std::string& where, const std::map<std::string, Setter>& fields) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    it->second(value, where + "." + key);
  }
}

template <typename T>
T as(const json& v, const std::string& where) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
          throw ConfigError(where + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <typename T>
Setter set(T& field) {
  return [&field](const json& v, const std::string& where) { field = as<T>(v, where); };
}

template <typename T>
Setter set_list(std::vector<T>& field) {
  return [&field](const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array");
    field.clear();
    for (const auto& x : v) field.push_back(as<T>(x, where));
  };
}

void apply_model(nn::ModelConfig& m, const json& j, const std::string& where, std::string* preset) {
  if (j.contains("preset")) {
    const auto name = as<std::string>(j["preset"], where + ".preset");
    if (name == "desk") m = nn::ModelConfig::desk();
    else if (name == "full") m = nn::ModelConfig::full();
    else throw ConfigError(where + ".preset: expected \"desk\" or \"full\"");
    if (preset) *preset = name;
  }
  std::vector<std::int64_t> kernel(m.extractor.frontend_kernel.begin(), m.extractor.frontend_kernel.end());
  apply_fields(j, where,
               {{"preset", [](const json&, const std::string&) {}},
                {"clipLength", set(m.clip_length)},
                {"inputSize", set(m.input_size)},
                {"lipreadClasses", set(m.lipread_classes)},
                {"inputMean", set(m.input_mean)},
                {"inputStd", set(m.input_std)},
                {"extractor",
                 [&](const json& v, const std::string& w) {
                   apply_fields(v, w,
                                {{"frontendChannels", set(m.extractor.frontend_channels)},
                                 {"frontendKernel", set_list(kernel)},
                                 {"stageChannels", set_list(m.extractor.stage_channels)},
                                 {"blocksPerStage", set(m.extractor.blocks_per_stage)}});
                 }},
                {"tcn", [&](const json& v, const std::string& w) {
                   apply_fields(v, w,
                                {{"blocks", set(m.tcn.blocks)},
                                 {"kernels", set_list(m.tcn.kernels)},
                                 {"branchWidth", set(m.tcn.branch_width)},
                                 {"dropout", set(m.tcn.dropout)}});
                 }}});
  if (kernel.size() != 3) throw ConfigError(where + ".extractor.frontendKernel: expected three entries (T, H, W)");
  std::copy(kernel.begin(), kernel.end(), m.extractor.frontend_kernel.begin());
  m.validate();
}

/// A float as the double with the same shortest decimal form, so 0.2f
/// serializes as 0.2.
double shortest(float f) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, f);
  return std::strtod(std::string(buf, r.ptr).c_str(), nullptr);
}

}  // namespace

nn::ModelConfig model_from_json(const json& j) {
  nn::ModelConfig m = nn::ModelConfig::desk();
  apply_model(m, j, "model", nullptr);
  return m;
}

json model_to_json(const nn::ModelConfig& m) {
  return json{{"clipLength", m.clip_length},
              {"inputSize", m.input_size},
              {"lipreadClasses", m.lipread_classes},
              {"inputMean", shortest(m.input_mean)},
              {"inputStd", shortest(m.input_std)},
              {"extractor",
               {{"frontendChannels", m.extractor.frontend_channels},
                {"frontendKernel", m.extractor.frontend_kernel},
                {"stageChannels", m.extractor.stage_channels},
                {"blocksPerStage", m.extractor.blocks_per_stage}}},
              {"tcn",
               {{"blocks", m.tcn.blocks},
                {"kernels", m.tcn.kernels},
                {"branchWidth", m.tcn.branch_width},
                {"dropout", shortest(m.tcn.dropout)}}}};
}

RunConfig parse_run_config(const json& j, RunConfig c) {
  std::string finetune = training::finetune_mode_name(c.train.finetune);
  std::string family = synth::family_name(c.synth.config.family);
  std::uint64_t seed = c.seed.value_or(0);
  bool has_seed = false;
  auto& tc = c.train.config;
  apply_fields(
      j, "config",
      {{"seed",
        [&](const json& v, const std::string& w) {
          if (v.is_null()) return;
          seed = as<std::uint64_t>(v, w);
          has_seed = true;
        }},
       {"threads", set(c.threads)},
       {"model", [&](const json& v, const std::string& w) { apply_model(c.model, v, w, &c.model_preset); }},
       {"synth",
        [&](const json& v, const std::string& w) {
          auto& s = c.synth.config;
          apply_fields(v, w,
                       {{"mode", set(c.synth.mode)},
                        {"dataset", set(c.synth.dataset)},
                        {"numVideos", set(s.num_videos)},
                        {"framesPerVideo", set(s.frames_per_video)},
                        {"vocab", set(s.vocab)},
                        {"artefactFamily", set(family)},
                        {"artefactStrength", set(s.strength)},
                        {"imageSize", set(s.image_size)},
                        {"noiseSigma", set(s.noise_sigma)},
                        {"testFraction", set(s.test_fraction)}});
        }},
       {"preprocess",
        [&](const json& v, const std::string& w) {
          apply_fields(v, w,
                       {{"clipLength", set(c.preprocess.clip_length)},
                        {"stride", set(c.preprocess.stride)},
                        {"smoothingWindow", set(c.preprocess.options.smoothing_window)}});
        }},
       {"train",
        [&](const json& v, const std::string& w) {
          apply_fields(v, w,
                       {{"task", set(c.train.task)},
                        {"finetune", set(finetune)},
                        {"batchSize", set(tc.batch_size)},
                        {"learningRate", set(tc.adam.learning_rate)},
                        {"beta1", set(tc.adam.beta1)},
                        {"beta2", set(tc.adam.beta2)},
                        {"eps", set(tc.adam.eps)},
                        {"patience", set(tc.patience)},
                        {"minDelta", set(tc.min_delta)},
                        {"maxEpochs", set(tc.max_epochs)},
                        {"maxSteps", set(tc.max_steps)},
                        {"valFraction", set(tc.val_fraction)},
                        {"augmentCrop", set(tc.augment_crop)},
                        {"augmentFlip", set(tc.augment_flip)}});
        }},
       {"eval", [&](const json& v, const std::string& w) {
          apply_fields(v, w,
                       {{"protocol", set(c.eval.protocol)},
                        {"clipLength", set(c.eval.score.clip_length)},
                        {"stride", set(c.eval.score.stride)},
                        {"batchSize", set(c.eval.score.batch_size)},
                        {"heldOut", set_list(c.eval.held_out)},
                        {"sweepLengths", set_list(c.eval.sweep_lengths)},
                        {"probeDownsample", set(c.eval.probe.downsample)},
                        {"probeIterations", set(c.eval.probe.iterations)},
                        {"probeL2", set(c.eval.probe.l2)}});
        }}});
  if (has_seed) c.seed = seed;
  c.train.finetune = training::parse_finetune_mode(finetune);
  c.synth.config.family = synth::parse_family(family);
  if (c.seed) {
    c.synth.config.seed = *c.seed;
    tc.seed = *c.seed;
  }
  if (c.synth.mode != "forgery" && c.synth.mode != "lipreading")
    throw ConfigError("config.synth.mode: expected \"forgery\" or \"lipreading\"");
  if (c.train.task != "forgery" && c.train.task != "lipreading")
    throw ConfigError("config.train.task: expected \"forgery\" or \"lipreading\"");
  static const std::vector<std::string> protocols{"plain", "cross-manipulation", "robustness", "clip-sweep",
                                                  "frame-probe"};
  if (std::find(protocols.begin(), protocols.end(), c.eval.protocol) == protocols.end())
    throw ConfigError("config.eval.protocol: unknown protocol '" + c.eval.protocol + "'");
  if (c.threads < 0) throw ConfigError("config.threads must be non-negative");
  c.synth.config.validate();
  tc.validate();
  c.model.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, std::move(base));
}

json to_json(const RunConfig& c) {
  const auto& s = c.synth.config;
  const auto& tc = c.train.config;
  json model = model_to_json(c.model);
  model["preset"] = c.model_preset;
  return json{{"seed", c.seed ? json(*c.seed) : json(nullptr)},
              {"threads", c.threads},
              {"model", model},
              {"synth",
               {{"mode", c.synth.mode},
                {"dataset", c.synth.dataset},
                {"numVideos", s.num_videos},
                {"framesPerVideo", s.frames_per_video},
                {"vocab", s.vocab},
                {"artefactFamily", synth::family_name(s.family)},
                {"artefactStrength", s.strength},
                {"imageSize", s.image_size},
                {"noiseSigma", s.noise_sigma},
                {"testFraction", s.test_fraction}}},
              {"preprocess",
               {{"clipLength", c.preprocess.clip_length},
                {"stride", c.preprocess.stride},
                {"smoothingWindow", c.preprocess.options.smoothing_window}}},
              {"train",
               {{"task", c.train.task},
                {"finetune", training::finetune_mode_name(c.train.finetune)},
                {"batchSize", tc.batch_size},
                {"learningRate", shortest(tc.adam.learning_rate)},
                {"beta1", shortest(tc.adam.beta1)},
                {"beta2", shortest(tc.adam.beta2)},
                {"eps", shortest(tc.adam.eps)},
                {"patience", tc.patience},
                {"minDelta", tc.min_delta},
                {"maxEpochs", tc.max_epochs},
                {"maxSteps", tc.max_steps},
                {"valFraction", tc.val_fraction},
                {"augmentCrop", tc.augment_crop},
                {"augmentFlip", tc.augment_flip}}},
              {"eval",
               {{"protocol", c.eval.protocol},
                {"clipLength", c.eval.score.clip_length},
                {"stride", c.eval.score.stride},
                {"batchSize", c.eval.score.batch_size},
                {"heldOut", c.eval.held_out},
                {"sweepLengths", c.eval.sweep_lengths},
                {"probeDownsample", c.eval.probe.downsample},
                {"probeIterations", c.eval.probe.iterations},
                {"probeL2", c.eval.probe.l2}}}};
}

}  // namespace mouthtrace
