#pragma once

#include <map>
#include <string>

#include "mouthtrace/nn/params.hpp"

namespace mouthtrace::training {

struct AdamConfig {
  float learning_rate = 2e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

struct AdamState {
  std::int64_t step = 0;
  std::map<std::string, AdamMoments> moments;
};

/// One bias-corrected Adam update of a single tensor at step t >= 1.
void adam_update(Tensor& param, const Tensor& grad, AdamMoments& moments, std::int64_t t, const AdamConfig& config);

/// Applies one step to every gradient whose parameter sits in a trainable
/// partition; frozen partitions and buffers are never written.
void adam_step(nn::ParameterStore& params, const std::map<std::string, Tensor>& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace mouthtrace::training
