#include "mouthtrace/preprocess/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace mouthtrace::preprocess {

namespace {

Point mean_of(const Landmarks& lm, int first, int last) {
  Point p;
  for (int i = first; i <= last; ++i) {
    p.x += lm[static_cast<std::size_t>(i)].x;
    p.y += lm[static_cast<std::size_t>(i)].y;
  }
  const double n = last - first + 1;
  return {p.x / n, p.y / n};
}

}  // namespace

FivePoints five_points(const Landmarks& lm) {
  return {mean_of(lm, 36, 41), mean_of(lm, 42, 47), lm[28], lm[30], lm[33]};
}

Point mouth_centre(const Landmarks& lm) { return mean_of(lm, 48, 67); }

Similarity Similarity::inverse() const {
  const double d = a * a + b * b;
  if (d == 0.0) throw DataError("singular similarity transform");
  Similarity inv;
  inv.a = a / d;
  inv.b = -b / d;
  const Point t = inv.apply({-tx, -ty});
  inv.tx = t.x;
  inv.ty = t.y;
  return inv;
}

Similarity Similarity::compose(const Similarity& in) const {
  Similarity out;
  out.a = a * in.a - b * in.b;
  out.b = b * in.a + a * in.b;
  const Point t = apply({in.tx, in.ty});
  out.tx = t.x;
  out.ty = t.y;
  return out;
}

Similarity Similarity::from_params(double scale, double angle, double tx, double ty) {
  return {scale * std::cos(angle), scale * std::sin(angle), tx, ty};
}

Similarity estimate_similarity(const FivePoints& src, const FivePoints& ref) {
  Point ms, mr;
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms.x += src[i].x;
    ms.y += src[i].y;
    mr.x += ref[i].x;
    mr.y += ref[i].y;
  }
  const double n = static_cast<double>(src.size());
  ms = {ms.x / n, ms.y / n};
  mr = {mr.x / n, mr.y / n};
  double dot = 0.0, cross = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double sx = src[i].x - ms.x, sy = src[i].y - ms.y;
    const double rx = ref[i].x - mr.x, ry = ref[i].y - mr.y;
    dot += sx * rx + sy * ry;
    cross += sx * ry - sy * rx;
    norm += sx * sx + sy * sy;
  }
  double spread = 0.0;
  for (const auto& p : ref) spread = std::max(spread, std::abs(p.x - mr.x) + std::abs(p.y - mr.y));
  if (!(norm > 1e-18 * std::max(1.0, spread * spread)) || !std::isfinite(norm)) {
    throw DataError("degenerate landmark configuration: source points coincide");
  }
  Similarity s;
  s.a = dot / norm;
  s.b = cross / norm;
  s.tx = mr.x - (s.a * ms.x - s.b * ms.y);
  s.ty = mr.y - (s.b * ms.x + s.a * ms.y);
  return s;
}

LandmarkTrack smooth_landmarks(const LandmarkTrack& track, int window) {
  if (window < 1) throw ConfigError("smoothing window must be >= 1");
  const auto F = static_cast<std::ptrdiff_t>(track.size());
  LandmarkTrack out(track.size());
  const std::ptrdiff_t before = window / 2, after = window - window / 2 - 1;
  for (std::ptrdiff_t t = 0; t < F; ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - before);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(F - 1, t + after);
    const double n = static_cast<double>(hi - lo + 1);
    for (std::size_t k = 0; k < static_cast<std::size_t>(kLandmarkCount); ++k) {
      double sx = 0.0, sy = 0.0;
      for (std::ptrdiff_t u = lo; u <= hi; ++u) {
        sx += track[static_cast<std::size_t>(u)][k].x;
        sy += track[static_cast<std::size_t>(u)][k].y;
      }
      out[static_cast<std::size_t>(t)][k] = {sx / n, sy / n};
    }
  }
  return out;
}

}  // namespace mouthtrace::preprocess
