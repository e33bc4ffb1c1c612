#include "mouthtrace/training/adam.hpp"

#include <cmath>

namespace mouthtrace::training {

void adam_update(Tensor& param, const Tensor& grad, AdamMoments& moments, std::int64_t t, const AdamConfig& config) {
  if (grad.shape() != param.shape()) {
    throw ShapeError("adam: gradient " + shape_string(grad.shape()) + " vs parameter " + shape_string(param.shape()));
  }
  if (t < 1) throw ConfigError("adam: step must be >= 1");
  if (moments.m.shape() != param.shape()) {
    moments.m = Tensor(param.shape());
    moments.v = Tensor(param.shape());
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const float step = static_cast<float>(config.learning_rate / c1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  float* p = param.ptr();
  float* m = moments.m.ptr();
  float* v = moments.v.ptr();
  const float* g = grad.ptr();
  const float fb1 = config.beta1, fb2 = config.beta2;
  for (std::int64_t i = 0; i < param.numel(); ++i) {
    m[i] = fb1 * m[i] + (1.0f - fb1) * g[i];
    v[i] = fb2 * v[i] + (1.0f - fb2) * g[i] * g[i];
    p[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + config.eps);
  }
}

void adam_step(nn::ParameterStore& params, const std::map<std::string, Tensor>& grads, AdamState& state,
               const AdamConfig& config) {
  for (const auto& [name, g] : grads) {
    const auto& e = params.entry(name);
    if (e.buffer) throw ConfigError("adam: " + name + " is a buffer, not a parameter");
    if (g.shape() != e.value.shape()) {
      throw ShapeError("adam: gradient for " + name + " has shape " + shape_string(g.shape()) + ", parameter " +
                       shape_string(e.value.shape()));
    }
  }
  ++state.step;
  for (const auto& [name, g] : grads) {
    if (!params.trainable(params.entry(name).partition)) continue;
    adam_update(params.get(name), g, state.moments[name], state.step, config);
  }
}

}  // namespace mouthtrace::training
