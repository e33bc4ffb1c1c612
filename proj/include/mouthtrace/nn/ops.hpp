#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mouthtrace/nn/autodiff.hpp"
#include "mouthtrace/rng.hpp"

namespace mouthtrace::nn {

// ---------------------------------------------------------------------------
// Convolution (cross-correlation) over 1, 2 or 3 spatial axes.
//
// input  [N, C_in, s_1..s_r], weight [C_out, C_in, k_1..k_r], bias [C_out].
// Output extent per axis: floor((n + 2p - d(k-1) - 1) / s) + 1.

struct ConvOptions {
  std::vector<std::int64_t> stride;    // empty = all ones
  std::vector<std::int64_t> dilation;  // empty = all ones
  std::vector<std::int64_t> padding;   // empty = all zeros
  bool same = false;                   // stride 1, padding d(k-1)/2; odd kernels only
};

Var conv(const Var& input, const Var& weight, const std::optional<Var>& bias, const ConvOptions& options = {});

std::int64_t conv_output_extent(std::int64_t n, std::int64_t k, std::int64_t stride, std::int64_t dilation,
                                std::int64_t padding);

// ---------------------------------------------------------------------------
// Normalization and activations. Channel axis is 1 for all of them.

inline constexpr float kBatchNormMomentum = 0.1f;
inline constexpr float kBatchNormEps = 1e-5f;

/// Train mode normalizes with batch statistics (biased variance) and, when
/// running stats are given, blends them with momentum 0.1 (unbiased batch
/// variance). Eval mode uses the running statistics.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor* running_mean, Tensor* running_var,
               bool train, float momentum = kBatchNormMomentum, float eps = kBatchNormEps);

Var prelu(const Var& x, const Var& slope);
Var relu(const Var& x);

/// Inverted dropout: train mode zeroes with probability p and rescales the
/// survivors by 1/(1-p); eval mode is the identity.
Var dropout(const Var& x, float p, bool train, Rng* rng);

// ---------------------------------------------------------------------------
// Pooling.

/// Max pooling over the trailing spatial axes of [N, C, s_1..s_r]; padding
/// positions never win.
Var max_pool(const Var& x, const std::vector<std::int64_t>& kernel, const std::vector<std::int64_t>& stride,
             const std::vector<std::int64_t>& padding);

/// Mean over one axis (temporal average pooling when applied to the T axis).
Var mean_axis(const Var& x, std::size_t axis);

/// [N, C, H, W] -> [N, C].
Var global_avg_pool_spatial(const Var& x);

// ---------------------------------------------------------------------------
// Dense and structural ops.

/// x [N, in], weight [out, in], bias [out] -> [N, out].
Var linear(const Var& x, const Var& weight, const std::optional<Var>& bias);

Var add(const Var& a, const Var& b);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& order);

Var sum(const Var& x);
Var mean(const Var& x);
/// sum_i weights_i * x_i with constant weights; used to project a tensor
/// output to a scalar in gradient checks.
Var dot_constant(const Var& x, const Tensor& weights);

// Plain tensor helpers shared by the ops and the data pipeline.
Tensor permute_tensor(const Tensor& x, const std::vector<std::size_t>& order);

}  // namespace mouthtrace::nn
