#include "mouthtrace/eval/probe.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mouthtrace/eval/metrics.hpp"
#include "mouthtrace/eval/scoring.hpp"

namespace mouthtrace::eval {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Block means of each frame, one row per frame.
Matrix frame_features(const Tensor& frames, int d) {
  const Shape& s = frames.shape();
  if (s.size() != 4 || s[3] != 1) throw ShapeError("frame probe expects [F, H, W, 1], got " + shape_string(s));
  if (d < 1 || s[1] % d != 0 || s[2] % d != 0) throw ConfigError("probe downsample must divide the frame size");
  const std::int64_t F = s[0], H = s[1], W = s[2], h = H / d, w = W / d;
  Matrix X(F, h * w);
  for (std::int64_t f = 0; f < F; ++f)
    for (std::int64_t by = 0; by < h; ++by)
      for (std::int64_t bx = 0; bx < w; ++bx) {
        double acc = 0.0;
        for (int y = 0; y < d; ++y)
          for (int x = 0; x < d; ++x) acc += frames[(f * H + by * d + y) * W + bx * d + x];
        X(f, by * w + bx) = acc / (d * d);
      }
  return X;
}

Matrix stack_features(const std::vector<training::VideoSample>& videos, int d, std::vector<int>* labels) {
  std::vector<Matrix> parts;
  std::int64_t rows = 0;
  for (const auto& v : videos) {
    parts.push_back(frame_features(v.frames, d));
    rows += parts.back().rows();
    labels->insert(labels->end(), static_cast<std::size_t>(parts.back().rows()), v.label);
  }
  if (parts.empty()) throw DataError("frame probe needs at least one video");
  Matrix X(rows, parts.front().cols());
  std::int64_t r = 0;
  for (const auto& p : parts) {
    X.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return X;
}

Eigen::VectorXd probabilities(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return probability(v); });
}

}  // namespace

std::vector<double> FrameProbe::predict(const Tensor& frames) const {
  Matrix X = frame_features(frames, downsample);
  const Eigen::Map<const Eigen::RowVectorXd> mu(mean.data(), static_cast<Eigen::Index>(mean.size()));
  const Eigen::Map<const Eigen::RowVectorXd> is(inv_std.data(), static_cast<Eigen::Index>(inv_std.size()));
  X = ((X.rowwise() - mu).array().rowwise() * is.array()).matrix();
  const Eigen::Map<const Eigen::VectorXd> wv(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Eigen::VectorXd p = probabilities(((X * wv).array() + bias).matrix());
  return {p.data(), p.data() + p.size()};
}

FrameProbe train_frame_probe(const std::vector<training::VideoSample>& train, const ProbeConfig& config) {
  if (config.iterations < 1) throw ConfigError("probe iterations must be positive");
  std::vector<int> labels;
  Matrix X = stack_features(train, config.downsample, &labels);
  const auto n = static_cast<double>(X.rows());
  const Eigen::RowVectorXd mu = X.colwise().mean();
  X.rowwise() -= mu;
  const Eigen::RowVectorXd sd = (X.array().square().colwise().sum() / n).sqrt();
  const Eigen::RowVectorXd is = sd.unaryExpr([](double v) { return v > 1e-12 ? 1.0 / v : 0.0; });
  X = (X.array().rowwise() * is.array()).matrix();
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = labels[static_cast<std::size_t>(i)];

  // Step 1/L with L the logistic-loss curvature bound 0.25 lambda_max(X'X/n) + l2;
  // lambda_max from power iteration with a fixed start.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(X.cols()).normalized();
  double lambda = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd u = X.transpose() * (X * v) / n;
    lambda = u.norm();
    if (lambda == 0.0) break;
    v = u / lambda;
  }
  const double step = 1.0 / (0.25 * lambda * 1.05 + config.l2 + 1e-12);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double b = 0.0;
  for (int it = 0; it < config.iterations; ++it) {
    const Eigen::VectorXd r = probabilities(((X * w).array() + b).matrix()) - y;
    w -= step * (X.transpose() * r / n + config.l2 * w);
    b -= 4.0 * r.mean();  // intercept curvature is at most 1/4
  }
  FrameProbe probe;
  probe.downsample = config.downsample;
  probe.mean.assign(mu.data(), mu.data() + mu.size());
  probe.inv_std.assign(is.data(), is.data() + is.size());
  probe.weights.assign(w.data(), w.data() + w.size());
  probe.bias = b;
  return probe;
}

ProbeResult run_frame_probe(const std::vector<training::VideoSample>& train,
                            const std::vector<training::VideoSample>& test, const ProbeConfig& config) {
  const FrameProbe probe = train_frame_probe(train, config);
  ProbeResult r;
  auto frame_auc = [&](const std::vector<training::VideoSample>& videos, std::int64_t* count, double* video_auc) {
    std::vector<double> s, vs;
    std::vector<int> y, vy;
    for (const auto& v : videos) {
      const auto p = probe.predict(v.frames);
      double total = 0.0;
      for (double x : p) {
        s.push_back(x);
        y.push_back(v.label);
        total += x;
      }
      vs.push_back(total / static_cast<double>(p.size()));
      vy.push_back(v.label);
    }
    *count = static_cast<std::int64_t>(s.size());
    if (video_auc) *video_auc = roc_auc(vs, vy).auc;
    return roc_auc(s, y).auc;
  };
  r.train_frame_auc = frame_auc(train, &r.train_frames, nullptr);
  r.test_frame_auc = frame_auc(test, &r.test_frames, &r.test_video_auc);
  return r;
}

}  // namespace mouthtrace::eval
