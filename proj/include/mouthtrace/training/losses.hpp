#pragma once

#include <vector>

#include "mouthtrace/nn/autodiff.hpp"

namespace mouthtrace::training {

/// Mean softmax cross entropy over a batch: logits [N, L], labels in [0, L).
/// Uses log-sum-exp; throws DataError on out-of-range labels.
nn::Var ce_loss(const nn::Var& logits, const std::vector<int>& labels);

/// Mean binary cross entropy on logits [N] or [N, 1], labels in {0, 1}, in the
/// softplus form max(z,0) - y z + log(1 + exp(-|z|)).
nn::Var bce_loss(const nn::Var& logits, const std::vector<int>& labels);

// Unbatched values, computed in double.
double ce_loss(const Tensor& logits, int label);
double bce_loss(float logit, int label);

}  // namespace mouthtrace::training
