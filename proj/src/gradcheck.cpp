#include "mouthtrace/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mouthtrace/nn/ops.hpp"
#include "mouthtrace/rng.hpp"
#include "mouthtrace/training/losses.hpp"

namespace mouthtrace::gradcheck {

using nn::Var;

namespace {

double rms(const Tensor& t) {
  if (t.numel() == 0) return 0.0;
  double acc = 0.0;
  for (float v : t.data()) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(t.numel()));
}

double project(const Tensor& y, const Tensor& direction) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < y.numel(); ++i) acc += static_cast<double>(direction[i]) * y[i];
  return acc;
}

std::vector<Var> as_leaves(const std::vector<Tensor>& inputs, bool grad) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(Var::leaf(t, grad));
  return leaves;
}

// --- input generators ------------------------------------------------------

std::int64_t pick(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Tensor normal(Rng& rng, Shape s, float sd = 1.0f) { return rng_normal(rng, s, 0.0f, sd); }

// Values bounded away from zero so the step never crosses a kink.
Tensor away_from_zero(Rng& rng, Shape s) {
  Tensor t(std::move(s));
  for (auto& v : t.data()) {
    const float mag = 0.2f + static_cast<float>(std::abs(rng.normal()));
    v = rng.bernoulli(0.5) ? mag : -mag;
  }
  return t;
}

// Distinct values on a 0.1 grid (plus tiny noise) so max-pool winners are
// stable under the finite-difference step.
Tensor well_separated(Rng& rng, Shape s) {
  Tensor t(std::move(s));
  std::vector<std::int64_t> order(static_cast<std::size_t>(t.numel()));
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  const double centre = 0.05 * static_cast<double>(t.numel());
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(0.1 * order[i] - centre + 0.01 * rng.uniform());
  return t;
}

Tensor positive(Rng& rng, Shape s, float lo, float hi) {
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = lo + (hi - lo) * rng.uniform_float();
  return t;
}

struct Instance {
  OutputFn fn;
  std::vector<Tensor> inputs;
  double step_scale = 1e-2;
};

using CaseMaker = std::function<Instance(Rng&)>;

Instance conv_case(Rng& rng, std::size_t rank) {
  const std::int64_t n = pick(rng, 1, 2), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
  Shape xs{n, cin}, ws{cout, cin};
  nn::ConvOptions opt;
  const bool same = rng.bernoulli(0.5);
  for (std::size_t a = 0; a < rank; ++a) {
    const std::int64_t k = rank == 3 ? pick(rng, 1, 2) * 2 - 1 : pick(rng, 1, 3) * 2 - 1;
    ws.push_back(k);
    if (same) {
      opt.dilation.push_back(pick(rng, 1, 2));
      xs.push_back(pick(rng, 4, rank == 1 ? 9 : 6));
    } else {
      opt.stride.push_back(pick(rng, 1, 2));
      opt.padding.push_back(pick(rng, 0, k / 2));
      opt.dilation.push_back(1);
      xs.push_back(pick(rng, k + 1, k + 4));
    }
  }
  opt.same = same;
  const bool with_bias = rng.bernoulli(0.7);
  Instance inst;
  inst.inputs = {normal(rng, xs), normal(rng, ws, 0.5f)};
  if (with_bias) inst.inputs.push_back(normal(rng, Shape{cout}));
  inst.fn = [opt, with_bias](const std::vector<Var>& v) {
    return nn::conv(v[0], v[1], with_bias ? std::optional<Var>(v[2]) : std::nullopt, opt);
  };
  return inst;
}

Instance batchnorm_case(Rng& rng, bool train) {
  const std::int64_t n = pick(rng, 2, 3), c = pick(rng, 1, 3);
  Shape xs{n, c, pick(rng, 2, 5)};
  if (rng.bernoulli(0.5)) xs.push_back(pick(rng, 2, 4));
  // With very few values per channel the normalized output is almost fully
  // determined and the float32 difference quotient loses its digits.
  if (train && shape_numel(xs) / c < 8) xs[2] = (8 + n - 1) / n;
  Instance inst;
  inst.inputs = {normal(rng, xs), positive(rng, Shape{c}, 0.5f, 1.5f), normal(rng, Shape{c})};
  if (train) {
    inst.fn = [](const std::vector<Var>& v) { return nn::batch_norm(v[0], v[1], v[2], nullptr, nullptr, true); };
  } else {
    auto rm = std::make_shared<Tensor>(normal(rng, Shape{c}, 0.3f));
    auto rv = std::make_shared<Tensor>(positive(rng, Shape{c}, 0.5f, 2.0f));
    inst.fn = [rm, rv](const std::vector<Var>& v) { return nn::batch_norm(v[0], v[1], v[2], rm.get(), rv.get(), false); };
  }
  return inst;
}

std::vector<std::pair<std::string, CaseMaker>> cases() {
  return {
      {"conv1d", [](Rng& r) { return conv_case(r, 1); }},
      {"conv2d", [](Rng& r) { return conv_case(r, 2); }},
      {"conv3d", [](Rng& r) { return conv_case(r, 3); }},
      {"batchnorm_train", [](Rng& r) { return batchnorm_case(r, true); }},
      {"batchnorm_eval", [](Rng& r) { return batchnorm_case(r, false); }},
      {"prelu",
       [](Rng& r) {
         const std::int64_t c = pick(r, 1, 4);
         Instance inst;
         inst.inputs = {away_from_zero(r, Shape{pick(r, 1, 3), c, pick(r, 2, 6)}), positive(r, Shape{c}, 0.05f, 0.5f)};
         inst.fn = [](const std::vector<Var>& v) { return nn::prelu(v[0], v[1]); };
         return inst;
       }},
      {"relu",
       [](Rng& r) {
         Instance inst;
         inst.inputs = {away_from_zero(r, Shape{pick(r, 1, 3), pick(r, 1, 3), pick(r, 2, 6)})};
         inst.fn = [](const std::vector<Var>& v) { return nn::relu(v[0]); };
         return inst;
       }},
      {"maxpool",
       [](Rng& r) {
         Instance inst;
         const bool three_d = r.bernoulli(0.5);
         Shape xs{pick(r, 1, 2), pick(r, 1, 2)};
         if (three_d) xs.push_back(pick(r, 2, 3));
         xs.push_back(pick(r, 4, 7));
         xs.push_back(pick(r, 4, 7));
         inst.inputs = {well_separated(r, xs)};
         inst.step_scale = 1e-2 / std::max(1.0, rms(inst.inputs[0]));
         inst.fn = [three_d](const std::vector<Var>& v) {
           if (three_d) return nn::max_pool(v[0], {1, 3, 3}, {1, 2, 2}, {0, 1, 1});
           return nn::max_pool(v[0], {3, 3}, {2, 2}, {1, 1});
         };
         return inst;
       }},
      {"avgpool_spatial",
       [](Rng& r) {
         Instance inst;
         inst.inputs = {normal(r, Shape{pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 4), pick(r, 1, 4)})};
         inst.fn = [](const std::vector<Var>& v) { return nn::global_avg_pool_spatial(v[0]); };
         return inst;
       }},
      {"avgpool_temporal",
       [](Rng& r) {
         Instance inst;
         inst.inputs = {normal(r, Shape{pick(r, 1, 3), pick(r, 1, 4), pick(r, 1, 6)})};
         inst.fn = [](const std::vector<Var>& v) { return nn::mean_axis(v[0], 2); };
         return inst;
       }},
      {"linear",
       [](Rng& r) {
         const std::int64_t in = pick(r, 1, 6), out = pick(r, 1, 4);
         Instance inst;
         inst.inputs = {normal(r, Shape{pick(r, 1, 4), in}), normal(r, Shape{out, in}), normal(r, Shape{out})};
         inst.fn = [](const std::vector<Var>& v) { return nn::linear(v[0], v[1], v[2]); };
         return inst;
       }},
      {"residual_add",
       [](Rng& r) {
         const Shape s{pick(r, 1, 3), pick(r, 1, 3), pick(r, 2, 5)};
         Instance inst;
         inst.inputs = {normal(r, s), normal(r, s)};
         inst.fn = [](const std::vector<Var>& v) { return nn::add(v[0], v[1]); };
         return inst;
       }},
      {"concat",
       [](Rng& r) {
         const std::int64_t n = pick(r, 1, 3), t = pick(r, 2, 5);
         Instance inst;
         inst.inputs = {normal(r, Shape{n, pick(r, 1, 3), t}), normal(r, Shape{n, pick(r, 1, 3), t}),
                        normal(r, Shape{n, pick(r, 1, 3), t})};
         inst.fn = [](const std::vector<Var>& v) { return nn::concat(v, 1); };
         return inst;
       }},
      {"dropout",
       [](Rng& r) {
         Instance inst;
         inst.inputs = {normal(r, Shape{pick(r, 1, 3), pick(r, 1, 3), pick(r, 2, 6)})};
         const std::uint64_t mask_seed = r.next_u64();
         inst.fn = [mask_seed](const std::vector<Var>& v) {
           Rng mask_rng(mask_seed);
           return nn::dropout(v[0], 0.2f, true, &mask_rng);
         };
         return inst;
       }},
      {"permute_reshape",
       [](Rng& r) {
         const Shape s{pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3)};
         Instance inst;
         inst.inputs = {normal(r, s)};
         inst.fn = [s](const std::vector<Var>& v) {
           Var p = nn::permute(v[0], {0, 2, 1, 3});
           return nn::reshape(p, Shape{s[0] * s[2], s[1] * s[3]});
         };
         return inst;
       }},
      {"ce_loss",
       [](Rng& r) {
         const std::int64_t n = pick(r, 1, 4), l = pick(r, 2, 6);
         std::vector<int> labels;
         for (std::int64_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(r.below(static_cast<std::uint64_t>(l))));
         Instance inst;
         inst.inputs = {normal(r, Shape{n, l}, 2.0f)};
         inst.fn = [labels](const std::vector<Var>& v) { return training::ce_loss(v[0], labels); };
         return inst;
       }},
      {"bce_loss",
       [](Rng& r) {
         const std::int64_t n = pick(r, 1, 6);
         std::vector<int> labels;
         for (std::int64_t i = 0; i < n; ++i) labels.push_back(r.bernoulli(0.5) ? 1 : 0);
         Instance inst;
         inst.inputs = {normal(r, Shape{n, 1}, 2.0f)};
         inst.fn = [labels](const std::vector<Var>& v) { return training::bce_loss(v[0], labels); };
         return inst;
       }},
  };
}

}  // namespace

double relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) throw ShapeError("relative_error: shape mismatch");
  double diff = 0.0, na = 0.0, nn_ = 0.0;
  for (std::int64_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic[i], n = numeric[i];
    diff += (a - n) * (a - n);
    na += a * a;
    nn_ += n * n;
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nn_));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

std::vector<Tensor> numeric_gradients(const OutputFn& f, const std::vector<Tensor>& inputs, const Tensor& direction,
                                      double step_scale) {
  std::vector<Tensor> grads;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor g(inputs[i].shape());
    const double scale = rms(inputs[i]);
    const float h = static_cast<float>(step_scale * (scale > 0.0 ? scale : 1.0));
    for (std::int64_t j = 0; j < inputs[i].numel(); ++j) {
      const float orig = inputs[i][j];
      work[i][j] = orig + h;
      const float up = work[i][j];
      const double fp = project(f(as_leaves(work, false)).value(), direction);
      work[i][j] = orig - h;
      const float down = work[i][j];
      const double fm = project(f(as_leaves(work, false)).value(), direction);
      work[i][j] = orig;
      // Divide by the step actually representable in float.
      g[j] = static_cast<float>((fp - fm) / (static_cast<double>(up) - static_cast<double>(down)));
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<Tensor> analytic_gradients(const OutputFn& f, const std::vector<Tensor>& inputs, const Tensor& direction) {
  auto leaves = as_leaves(inputs, true);
  Var out = f(leaves);
  nn::backward(nn::dot_constant(out, direction));
  std::vector<Tensor> grads;
  for (const auto& leaf : leaves) grads.push_back(leaf.grad());
  return grads;
}

double check_instance(const OutputFn& f, const std::vector<Tensor>& inputs, std::uint64_t direction_seed,
                      double step_scale) {
  const Shape out_shape = f(as_leaves(inputs, false)).shape();
  Rng rng(direction_seed);
  const Tensor direction = rng_normal(rng, out_shape, 0.0f, 1.0f);
  const auto analytic = analytic_gradients(f, inputs, direction);
  const auto numeric = numeric_gradients(f, inputs, direction, step_scale);
  std::vector<float> a, n;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    a.insert(a.end(), analytic[i].data().begin(), analytic[i].data().end());
    n.insert(n.end(), numeric[i].data().begin(), numeric[i].data().end());
  }
  const Shape joint{static_cast<std::int64_t>(a.size())};
  return relative_error(Tensor(joint, std::move(a)), Tensor(joint, std::move(n)));
}

std::vector<std::string> layer_kinds() {
  std::vector<std::string> names;
  for (const auto& [name, maker] : cases()) names.push_back(name);
  return names;
}

std::vector<LayerReport> run_layer_checks(int instances, std::uint64_t seed, double tolerance) {
  std::vector<LayerReport> reports;
  const Rng base(seed);
  std::uint64_t case_index = 0;
  for (const auto& [name, maker] : cases()) {
    LayerReport report{name, instances, 0.0, true};
    for (int k = 0; k < instances; ++k) {
      Rng rng = base.substream(case_index, static_cast<std::uint64_t>(k));
      Instance inst = maker(rng);
      const double err = check_instance(inst.fn, inst.inputs, rng.next_u64(), inst.step_scale);
      report.worst_relative_error = std::max(report.worst_relative_error, err);
      if (!(err <= tolerance)) report.passed = false;
    }
    reports.push_back(report);
    ++case_index;
  }
  return reports;
}

}  // namespace mouthtrace::gradcheck
