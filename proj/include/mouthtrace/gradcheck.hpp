#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mouthtrace/nn/autodiff.hpp"

namespace mouthtrace::gradcheck {

/// Builds an output from leaf variables; the checker projects it onto a
/// fixed random direction to get a scalar.
using OutputFn = std::function<nn::Var(const std::vector<nn::Var>& inputs)>;

/// ||analytic - numeric|| / max(||analytic||, ||numeric||); 0 when both vanish.
double relative_error(const Tensor& analytic, const Tensor& numeric);

/// Central differences with per-input step step_scale * rms(input). The
/// projection sum_i r_i y_i is accumulated in double outside the graph.
std::vector<Tensor> numeric_gradients(const OutputFn& f, const std::vector<Tensor>& inputs, const Tensor& direction,
                                      double step_scale);

std::vector<Tensor> analytic_gradients(const OutputFn& f, const std::vector<Tensor>& inputs, const Tensor& direction);

/// Relative error of the gradient with respect to all inputs of one
/// instance, taken as one concatenated vector.
double check_instance(const OutputFn& f, const std::vector<Tensor>& inputs, std::uint64_t direction_seed,
                      double step_scale = 1e-2);

struct LayerReport {
  std::string layer;
  int instances = 0;
  double worst_relative_error = 0.0;
  bool passed = false;
};

/// Layer kinds covered by run_layer_checks, in report order.
std::vector<std::string> layer_kinds();

/// Random small instances of every layer kind and both losses.
std::vector<LayerReport> run_layer_checks(int instances, std::uint64_t seed, double tolerance = 1e-3);

}  // namespace mouthtrace::gradcheck
