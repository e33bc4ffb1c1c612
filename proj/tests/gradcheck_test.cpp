#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mouthtrace/gradcheck.hpp"
#include "mouthtrace/nn/ops.hpp"

using namespace mouthtrace;

TEST(Gradcheck, RelativeError) {
  EXPECT_EQ(gradcheck::relative_error(Tensor(Shape{2}), Tensor(Shape{2})), 0.0);
  EXPECT_NEAR(gradcheck::relative_error(Tensor::from({1, 0}), Tensor::from({0, 1})), std::sqrt(2.0), 1e-12);
}

TEST(Gradcheck, DetectsWrongGradient) {
  // An op whose backward is deliberately off by a factor of two.
  gradcheck::OutputFn bad = [](const std::vector<nn::Var>& v) {
    return nn::make_result(v[0].value(), {v[0]},
                           [](const Tensor& dy, const std::vector<std::shared_ptr<nn::Node>>& parents) {
                             parents[0]->accumulate(scale(dy, 2.0f));
                           },
                           "bad");
  };
  EXPECT_GT(gradcheck::check_instance(bad, {Tensor::from({1, 2, 3})}, 5), 0.1);
}

TEST(Gradcheck, CoversEveryLayerKind) {
  const auto kinds = gradcheck::layer_kinds();
  for (const char* k : {"conv1d", "conv2d", "conv3d", "batchnorm_train", "batchnorm_eval", "prelu", "relu", "maxpool",
                        "avgpool_spatial", "avgpool_temporal", "linear", "residual_add", "concat", "dropout",
                        "ce_loss", "bce_loss"})
    EXPECT_NE(std::find(kinds.begin(), kinds.end(), k), kinds.end()) << k;
}

TEST(Gradcheck, AllLayersWithinTolerance) {
  for (const auto& r : gradcheck::run_layer_checks(20, 2024)) {
    std::printf("%-18s worst %.3g\n", r.layer.c_str(), r.worst_relative_error);
    EXPECT_TRUE(r.passed) << r.layer << " worst " << r.worst_relative_error;
    EXPECT_EQ(r.instances, 20);
  }
}
