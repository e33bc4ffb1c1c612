#include "mouthtrace/training/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mouthtrace::training {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid_d(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

nn::Var ce_loss(const nn::Var& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw ShapeError("ce_loss expects logits [N, L], got " + shape_string(s));
  const std::int64_t N = s[0], L = s[1];
  if (static_cast<std::int64_t>(labels.size()) != N) throw ShapeError("ce_loss: label count does not match batch");
  if (N == 0) throw ShapeError("ce_loss on an empty batch");
  for (int y : labels)
    if (y < 0 || y >= L) throw DataError("ce_loss: label " + std::to_string(y) + " out of range [0, " + std::to_string(L) + ")");

  const float* z = logits.value().ptr();
  Tensor probs(s);
  double total = 0.0;
  for (std::int64_t n = 0; n < N; ++n) {
    const float* row = z + n * L;
    const double m = *std::max_element(row, row + L);
    double acc = 0.0;
    for (std::int64_t j = 0; j < L; ++j) acc += std::exp(row[j] - m);
    const double lse = m + std::log(acc);
    total += lse - row[labels[n]];
    for (std::int64_t j = 0; j < L; ++j) probs[n * L + j] = static_cast<float>(std::exp(row[j] - lse));
  }
  return nn::make_result(Tensor::scalar(static_cast<float>(total / static_cast<double>(N))), {logits},
      [probs = std::move(probs), labels, N, L](const Tensor& dy, const std::vector<std::shared_ptr<nn::Node>>& parents) {
        Tensor g(probs.shape());
        const double scale = dy[0] / static_cast<double>(N);
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t j = 0; j < L; ++j) {
            const double target = j == labels[n] ? 1.0 : 0.0;
            g[n * L + j] = static_cast<float>((probs[n * L + j] - target) * scale);
          }
        parents[0]->accumulate(std::move(g));
      },
      "ce_loss");
}

nn::Var bce_loss(const nn::Var& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  const bool ok = (s.size() == 1) || (s.size() == 2 && s[1] == 1);
  if (!ok) throw ShapeError("bce_loss expects logits [N] or [N, 1], got " + shape_string(s));
  const std::int64_t N = s[0];
  if (static_cast<std::int64_t>(labels.size()) != N) throw ShapeError("bce_loss: label count does not match batch");
  if (N == 0) throw ShapeError("bce_loss on an empty batch");
  for (int y : labels)
    if (y != 0 && y != 1) throw DataError("bce_loss: label " + std::to_string(y) + " is not 0 or 1");

  const float* z = logits.value().ptr();
  double total = 0.0;
  for (std::int64_t n = 0; n < N; ++n) total += softplus(z[n]) - labels[n] * static_cast<double>(z[n]);
  return nn::make_result(Tensor::scalar(static_cast<float>(total / static_cast<double>(N))), {logits},
      [labels, N](const Tensor& dy, const std::vector<std::shared_ptr<nn::Node>>& parents) {
        const auto& zv = parents[0]->value;
        Tensor g(zv.shape());
        const double scale = dy[0] / static_cast<double>(N);
        for (std::int64_t n = 0; n < N; ++n) g[n] = static_cast<float>((sigmoid_d(zv[n]) - labels[n]) * scale);
        parents[0]->accumulate(std::move(g));
      },
      "bce_loss");
}

double ce_loss(const Tensor& logits, int label) {
  if (logits.rank() != 1) throw ShapeError("ce_loss expects logits [L], got " + shape_string(logits.shape()));
  const std::int64_t L = logits.dim(0);
  if (label < 0 || label >= L) throw DataError("ce_loss: label " + std::to_string(label) + " out of range");
  const double m = *std::max_element(logits.data().begin(), logits.data().end());
  double acc = 0.0;
  for (float v : logits.data()) acc += std::exp(v - m);
  return m + std::log(acc) - logits[label];
}

double bce_loss(float logit, int label) {
  if (label != 0 && label != 1) throw DataError("bce_loss: label " + std::to_string(label) + " is not 0 or 1");
  return softplus(logit) - label * static_cast<double>(logit);
}

}  // namespace mouthtrace::training
