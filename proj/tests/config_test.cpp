#include <gtest/gtest.h>

#include <fstream>

#include "mouthtrace/config.hpp"

using namespace mouthtrace;
using json = nlohmann::json;

namespace {

const std::filesystem::path kConfigs = MOUTHTRACE_SOURCE_DIR "/configs";

}  // namespace

TEST(RunConfig, DefaultsRoundTrip) {
  const RunConfig c;
  const json j = to_json(c);
  EXPECT_EQ(to_json(parse_run_config(j)), j);
  EXPECT_TRUE(j["seed"].is_null());
}

TEST(RunConfig, RoundTripKeepsEveryField) {
  RunConfig c;
  c.seed = 77;
  c.threads = 3;
  c.synth.mode = "lipreading";
  c.synth.config.num_videos = 12;
  c.synth.config.family = synth::ArtefactFamily::shape_flicker;
  c.preprocess.clip_length = 10;
  c.train.finetune = training::FinetuneMode::scratch;
  c.train.config.adam.learning_rate = 0.002f;
  c.eval.protocol = "robustness";
  c.eval.held_out = {"jitter"};
  const RunConfig back = parse_run_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.train.config.adam.learning_rate, 0.002f);
  EXPECT_EQ(back.synth.config.family, synth::ArtefactFamily::shape_flicker);
}

TEST(RunConfig, FloatsSerializeShortest) {
  const json j = to_json(RunConfig{});
  EXPECT_EQ(j["model"]["tcn"]["dropout"].dump(), "0.2");
  EXPECT_EQ(j["train"]["learningRate"].dump(), "0.0002");
}

TEST(RunConfig, SeedPropagates) {
  const RunConfig c = parse_run_config(json{{"seed", 9}});
  ASSERT_TRUE(c.seed.has_value());
  EXPECT_EQ(c.synth.config.seed, 9u);
  EXPECT_EQ(c.train.config.seed, 9u);
}

TEST(RunConfig, UnknownKeysRejected) {
  EXPECT_THROW(parse_run_config(json{{"sed", 1}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"train", {{"lr", 1e-3}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", {{"tcn", {{"width", 8}}}}}}), ConfigError);
}

TEST(RunConfig, BadValuesRejected) {
  EXPECT_THROW(parse_run_config(json{{"seed", -1}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"train", {{"batchSize", "16"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"train", {{"batchSize", 0}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"train", {{"finetune", "partial"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"eval", {{"protocol", "cross-dataset"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"synth", {{"artefactFamily", "warp"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", {{"preset", "tiny"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", {{"extractor", {{"frontendKernel", {5, 7}}}}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json::array()), ConfigError);
}

TEST(RunConfig, PresetAppliedBeforeOverrides) {
  const RunConfig c = parse_run_config(json{{"model", {{"lipreadClasses", 10}, {"preset", "full"}}}});
  EXPECT_EQ(c.model_preset, "full");
  EXPECT_EQ(c.model.embedding_dim(), 512);
  EXPECT_EQ(c.model.lipread_classes, 10);
}

TEST(RunConfig, ModelJsonRoundTrip) {
  nn::ModelConfig m = nn::ModelConfig::desk();
  m.tcn.kernels = {3, 5};
  m.extractor.frontend_kernel = {3, 5, 5};
  const nn::ModelConfig back = model_from_json(model_to_json(m));
  EXPECT_EQ(model_to_json(back), model_to_json(m));
}

TEST(RunConfig, ShippedConfigsLoad) {
  const RunConfig desk = load_run_config(kConfigs / "desk.json");
  EXPECT_EQ(desk.model_preset, "desk");
  EXPECT_EQ(desk.train.config.batch_size, 16);
  EXPECT_FLOAT_EQ(desk.train.config.adam.learning_rate, 2e-3f);
  EXPECT_EQ(desk.synth.config.num_videos, 500);
  const RunConfig full = load_run_config(kConfigs / "full.json");
  EXPECT_EQ(full.model.embedding_dim(), 512);
  EXPECT_EQ(full.train.config.batch_size, 32);
  EXPECT_FLOAT_EQ(full.train.config.adam.learning_rate, 2e-4f);
}

TEST(RunConfig, MissingOrMalformedFile) {
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
  const auto path = std::filesystem::temp_directory_path() / "mouthtrace_bad_config.json";
  {
    std::ofstream(path) << "{\"seed\": ";
  }
  EXPECT_THROW(load_run_config(path), ConfigError);
  std::filesystem::remove(path);
}
