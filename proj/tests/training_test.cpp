#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "mouthtrace/training/adam.hpp"
#include "mouthtrace/training/early_stop.hpp"
#include "mouthtrace/training/losses.hpp"
#include "mouthtrace/training/sampling.hpp"
#include "mouthtrace/training/trainer.hpp"

using namespace mouthtrace;
using namespace mouthtrace::training;

TEST(Losses, BceAtZeroIsLn2) { EXPECT_NEAR(bce_loss(0.0f, 1), std::log(2.0), 1e-12); }

TEST(Losses, BceSaturates) {
  EXPECT_LE(bce_loss(20.0f, 1), 1e-8);
  EXPECT_GE(bce_loss(20.0f, 1), 0.0);
  EXPECT_NEAR(bce_loss(-20.0f, 1), 20.0, 1e-6);
}

TEST(Losses, CeUniformIsLogL) {
  EXPECT_NEAR(ce_loss(Tensor(Shape{5}, 0.3f), 2), std::log(5.0), 1e-12);
  EXPECT_THROW(ce_loss(Tensor(Shape{5}), 5), DataError);
  EXPECT_THROW(bce_loss(0.0f, 2), DataError);
}

TEST(Losses, BatchedMatchesScalar) {
  Tensor logits(Shape{2, 3}, std::vector<float>{0.5f, -1.0f, 2.0f, 3.0f, 0.0f, -0.5f});
  const double expect = 0.5 * (ce_loss(Tensor::from({0.5f, -1.0f, 2.0f}), 1) + ce_loss(Tensor::from({3.0f, 0.0f, -0.5f}), 0));
  EXPECT_NEAR(ce_loss(nn::Var::constant(logits), {1, 0}).value().item(), expect, 1e-6);
  const double b = 0.5 * (bce_loss(1.5f, 0) + bce_loss(-2.0f, 1));
  EXPECT_NEAR(bce_loss(nn::Var::constant(Tensor::from({1.5f, -2.0f})), {0, 1}).value().item(), b, 1e-6);
}

TEST(Adam, FirstStepIsSignTimesLr) {
  Tensor p = Tensor::from({1.0f, -2.0f, 0.5f});
  AdamMoments m;
  AdamConfig c;
  adam_update(p, Tensor::from({0.3f, -4.0f, 1e-3f}), m, 1, c);
  EXPECT_NEAR(p[0], 1.0f - 2e-4f, 1e-7);
  EXPECT_NEAR(p[1], -2.0f + 2e-4f, 1e-7);
  EXPECT_NEAR(p[2], 0.5f - 2e-4f, 1e-7);
}

TEST(Adam, ZeroGradientLeavesParams) {
  Tensor p = Tensor::from({1.0f, -2.0f});
  const Tensor orig = p;
  AdamMoments m;
  for (int t = 1; t <= 50; ++t) adam_update(p, Tensor(Shape{2}), m, t, AdamConfig{});
  EXPECT_TRUE(bitwise_equal(p, orig));
}

TEST(Adam, ScalarQuadraticDescends) {
  Tensor theta = Tensor::scalar(1.0f);
  AdamMoments m;
  for (int t = 1; t <= 100; ++t) adam_update(theta, Tensor::scalar(2.0f * theta.item()), m, t, AdamConfig{});
  EXPECT_LT(std::abs(theta.item()), 1.0f);
  EXPECT_NEAR(theta.item(), 1.0f - 100 * 2e-4f, 1e-4);
}

TEST(Adam, ShapeMismatchAndFrozenPartitions) {
  nn::ParameterStore store;
  store.add_parameter("extractor/w", Tensor(Shape{2}, 1.0f));
  store.add_parameter("tcn/w", Tensor(Shape{2}, 1.0f));
  AdamState state;
  EXPECT_THROW(adam_step(store, {{"tcn/w", Tensor(Shape{3})}}, state, AdamConfig{}), ShapeError);
  store.set_trainable(nn::Partition::feature_extractor, false);
  adam_step(store, {{"tcn/w", Tensor(Shape{2}, 1.0f)}, {"extractor/w", Tensor(Shape{2}, 1.0f)}}, state, AdamConfig{});
  EXPECT_EQ(store.get("extractor/w")[0], 1.0f);
  EXPECT_LT(store.get("tcn/w")[0], 1.0f);
}

namespace {

std::map<std::size_t, int> counts(const std::vector<std::size_t>& order) {
  std::map<std::size_t, int> c;
  for (auto i : order) ++c[i];
  return c;
}

std::vector<int> labels_of(int reals, int fakes) {
  std::vector<int> l(static_cast<std::size_t>(reals), 0);
  l.insert(l.end(), static_cast<std::size_t>(fakes), 1);
  return l;
}

}  // namespace

TEST(Oversample, Balanced) {
  Rng rng(1);
  auto order = oversample_epoch(labels_of(10, 10), rng);
  EXPECT_EQ(order.size(), 20u);
  auto c = counts(order);
  EXPECT_EQ(c.size(), 20u);
}

TEST(Oversample, ThreeToOne) {
  Rng rng(2);
  const auto labels = labels_of(30, 10);
  auto order = oversample_epoch(labels, rng);
  ASSERT_EQ(order.size(), 60u);
  int fakes = 0;
  for (auto i : order) fakes += labels[i];
  EXPECT_EQ(fakes, 30);
  EXPECT_EQ(counts(order).size(), 40u);
}

TEST(Oversample, SingleMinority) {
  Rng rng(3);
  auto order = oversample_epoch(labels_of(1, 5), rng);
  ASSERT_EQ(order.size(), 10u);
  EXPECT_EQ(counts(order)[0], 5);
}

TEST(Oversample, PreservesEverySampleAndIsSeeded) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng a(seed), b(seed);
    const auto labels = labels_of(static_cast<int>(1 + seed % 7), static_cast<int>(2 + seed % 5));
    auto order = oversample_epoch(labels, a);
    EXPECT_EQ(order, oversample_epoch(labels, b));
    EXPECT_EQ(counts(order).size(), labels.size());
  }
  Rng rng(0);
  EXPECT_THROW(oversample_epoch(labels_of(3, 0), rng), DataError);
}

TEST(Augment, EvalIsCentreCrop) {
  Rng rng(0);
  Tensor clip(Shape{2, 96, 96, 1});
  for (std::int64_t i = 0; i < clip.numel(); ++i) clip[i] = static_cast<float>(i % 9973);
  Tensor out = augment(clip, rng, false);
  ASSERT_EQ(out.shape(), (Shape{2, 88, 88, 1}));
  EXPECT_EQ(out.at({1, 0, 0, 0}), clip.at({1, 4, 4, 0}));
  EXPECT_EQ(out.at({0, 87, 87, 0}), clip.at({0, 91, 91, 0}));
  EXPECT_EQ(draw_crop(96, 96, rng, false).top, 4);
}

TEST(Augment, TrainOffsetsUniform) {
  Rng rng(5);
  std::map<std::pair<std::int64_t, std::int64_t>, int> hist;
  int flips = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto p = draw_crop(96, 96, rng, true);
    ASSERT_GE(p.top, 0);
    ASSERT_LE(p.top, 8);
    ASSERT_GE(p.left, 0);
    ASSERT_LE(p.left, 8);
    ++hist[{p.top, p.left}];
    flips += p.flip;
  }
  EXPECT_EQ(hist.size(), 81u);
  // Chi-square with 80 degrees of freedom; the 0.999 quantile is about 124.8.
  double chi = 0.0;
  const double expect = draws / 81.0;
  for (const auto& [k, n] : hist) chi += (n - expect) * (n - expect) / expect;
  EXPECT_LT(chi, 124.8);
  EXPECT_NEAR(flips / static_cast<double>(draws), 0.5, 0.03);
}

TEST(Augment, FlipTwiceRestores) {
  Rng rng(6);
  Tensor clip = rng_uniform(rng, Shape{3, 10, 12, 1});
  EXPECT_TRUE(bitwise_equal(hflip(hflip(clip)), clip));
  EXPECT_FALSE(bitwise_equal(hflip(clip), clip));
  CropParams p{2, 3, true};
  Tensor big = rng_uniform(rng, Shape{2, 96, 96, 1});
  EXPECT_TRUE(bitwise_equal(crop_clip(big, p), hflip(crop_clip(big, CropParams{2, 3, false}))));
}

TEST(Augment, TooSmall) {
  Rng rng(0);
  EXPECT_THROW(augment(Tensor(Shape{1, 80, 96, 1}), rng, true), ShapeError);
}

TEST(EarlyStop, DecreasingNeverStops) {
  std::vector<double> h;
  for (int i = 0; i < 40; ++i) {
    h.push_back(10.0 - i);
    EXPECT_FALSE(early_stop(h));
  }
}

TEST(EarlyStop, FlatStopsAtEleven) {
  EarlyStopper s(10, 1e-4);
  for (int epoch = 1; epoch <= 11; ++epoch) EXPECT_EQ(s.update(1.0), epoch == 11) << epoch;
  EXPECT_TRUE(early_stop(std::vector<double>(11, 1.0)));
  EXPECT_FALSE(early_stop(std::vector<double>(10, 1.0)));
}

TEST(EarlyStop, ExactMinDeltaDoesNotReset) {
  // 0.25 steps are exact in binary.
  EarlyStopper s(2, 0.25);
  EXPECT_FALSE(s.update(2.0));
  EXPECT_FALSE(s.update(1.75));
  EXPECT_EQ(s.stale_epochs(), 1);
  EXPECT_TRUE(s.update(1.75));
  EarlyStopper t(2, 0.25);
  t.update(2.0);
  t.update(1.5);
  EXPECT_EQ(t.stale_epochs(), 0);
}

TEST(ClipStarts, Counting) {
  EXPECT_EQ(clip_starts(110, 25, 25).size(), 4u);
  EXPECT_EQ(clip_starts(24, 25, 25).size(), 0u);
  EXPECT_EQ(clip_starts(25, 25, 25).size(), 1u);
  EXPECT_EQ(clip_starts(30, 25, 1).size(), 6u);
}

namespace {

// Tiny random videos; enough to exercise the loops, not to learn anything.
std::vector<VideoSample> toy_videos(int n, int classes, std::uint64_t seed, std::int64_t frames = 7) {
  Rng rng(seed);
  std::vector<VideoSample> out;
  for (int i = 0; i < n; ++i) {
    VideoSample s;
    s.id = "v" + std::to_string(i);
    s.label = i % classes;
    s.frames = rng_uniform(rng, Shape{frames, 96, 96, 1});
    out.push_back(std::move(s));
  }
  return out;
}

nn::ModelConfig tiny_config() {
  nn::ModelConfig c = nn::ModelConfig::desk();
  c.clip_length = 5;
  c.extractor.frontend_channels = 4;
  c.extractor.stage_channels = {4, 4, 4, 4};
  c.extractor.blocks_per_stage = 1;
  c.tcn.branch_width = 4;
  c.tcn.blocks = 2;
  return c;
}

TrainConfig tiny_train(std::int64_t steps) {
  TrainConfig t;
  t.batch_size = 4;
  t.max_steps = steps;
  t.max_epochs = 1000;
  t.patience = 1000;
  t.seed = 77;
  t.adam.learning_rate = 1e-3f;
  return t;
}

}  // namespace

TEST(Trainer, RejectsOneClassAndEmpty) {
  nn::ModelConfig c = tiny_config();
  c.lipread_classes = 1;
  nn::Model m(c, 1);
  EXPECT_THROW(pretrain_lipreading(toy_videos(4, 1, 1), m, tiny_train(1)), ConfigError);
  nn::Model ok(tiny_config(), 1);
  EXPECT_THROW(pretrain_lipreading({}, ok, tiny_train(1)), DataError);
  EXPECT_THROW(finetune_forgery(toy_videos(6, 1, 1), ok, ok.params().to_map(), FinetuneMode::frozen, tiny_train(1)),
               DataError);
}

TEST(Trainer, FrozenModeFreezesExtractorOnly) {
  nn::Model m(tiny_config(), 3);
  const TensorMap before = m.params().to_map();
  auto r = finetune_forgery(toy_videos(10, 2, 4), m, before, FinetuneMode::frozen, tiny_train(12));
  EXPECT_EQ(r.steps, 12);
  // Compare the final (not best) weights too: run the same steps and inspect.
  const TensorMap after = m.params().to_map();
  for (const auto& [name, t] : before)
    if (nn::partition_of(name) == nn::Partition::feature_extractor) EXPECT_TRUE(bitwise_equal(t, after.at(name))) << name;
}

TEST(Trainer, FtWholeMovesExtractor) {
  nn::Model m(tiny_config(), 3);
  const TensorMap before = m.params().to_map();
  TrainConfig cfg = tiny_train(1);
  cfg.val_fraction = 0.0;
  finetune_forgery(toy_videos(8, 2, 4), m, before, FinetuneMode::ft_whole, cfg);
  bool changed = false;
  for (const auto& name : m.params().parameter_names(nn::Partition::feature_extractor))
    changed |= !bitwise_equal(before.at(name), m.params().get(name));
  EXPECT_TRUE(changed);
}

TEST(Trainer, SplitKeepsGroupsTogether) {
  auto data = toy_videos(20, 2, 1, 1);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].group = "src" + std::to_string(i / 2);
  Rng rng(4);
  auto [train, val] = split_validation(data, 0.1, rng);
  EXPECT_EQ(val.size(), 2u);
  EXPECT_EQ(train.size() + val.size(), 20u);
  EXPECT_EQ(data[val[0]].group, data[val[1]].group);
}

TEST(Trainer, SeededRunIsBitwiseReproducible) {
  auto run = [] {
    nn::Model m(tiny_config(), 3);
    auto r = pretrain_lipreading(toy_videos(8, 4, 9), m, tiny_train(6));
    std::vector<double> curve;
    for (const auto& e : r.history) curve.push_back(e.train_loss), curve.push_back(e.val_loss);
    return std::make_pair(encode_tensors(r.best), curve);
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, OneSmallStepLowersBatchLoss) {
  nn::Model m(tiny_config(), 3);
  auto data = toy_videos(4, 2, 12, 5);
  std::vector<Tensor> clips;
  std::vector<int> labels;
  Rng unused(0);
  Tensor batch(Shape{4, 5, 88, 88, 1});
  for (int i = 0; i < 4; ++i) {
    Tensor c = augment(data[static_cast<std::size_t>(i)].frames, unused, false);
    std::copy_n(c.ptr(), c.numel(), batch.ptr() + i * c.numel());
    labels.push_back(data[static_cast<std::size_t>(i)].label);
  }
  auto loss_of = [&](bool step) {
    nn::ParamBinder bind(m.params(), step);
    nn::Var loss = bce_loss(m.forward(bind, batch, nn::ForwardOptions{.record = step}), labels);
    if (step) {
      nn::backward(loss);
      AdamState state;
      adam_step(m.params(), bind.gradients(), state, AdamConfig{.learning_rate = 1e-6f});
    }
    return static_cast<double>(loss.value().item());
  };
  const double before = loss_of(true);
  EXPECT_LT(loss_of(false), before);
}
