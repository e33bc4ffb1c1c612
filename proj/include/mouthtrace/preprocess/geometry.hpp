#pragma once

#include <array>
#include <vector>

#include "mouthtrace/error.hpp"

namespace mouthtrace::preprocess {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr int kLandmarkCount = 68;
using Landmarks = std::array<Point, kLandmarkCount>;
using LandmarkTrack = std::vector<Landmarks>;

/// Five alignment points: left-eye centre (mean of 36-41), right-eye centre
/// (mean of 42-47), nose points 28, 30 and 33.
using FivePoints = std::array<Point, 5>;

FivePoints five_points(const Landmarks& landmarks);

/// Canonical 256x256 reference for the five points.
inline constexpr int kCanonicalSize = 256;
inline constexpr FivePoints kMeanFace{{{88.0, 104.0}, {168.0, 104.0}, {128.0, 118.0}, {128.0, 146.0}, {128.0, 158.0}}};

/// Similarity (rotation, uniform scale, translation):
///   x' = a x - b y + tx,  y' = b x + a y + ty.
struct Similarity {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Point apply(const Point& p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
  Similarity inverse() const;
  Similarity compose(const Similarity& inner) const;  // this(inner(p))
  std::array<std::array<double, 3>, 2> matrix() const { return {{{a, -b, tx}, {b, a, ty}}}; }

  static Similarity from_params(double scale, double angle_rad, double tx, double ty);
};

/// Least-squares similarity mapping src onto ref. Throws DataError when the
/// source points coincide (no scale or rotation is recoverable).
Similarity estimate_similarity(const FivePoints& src, const FivePoints& ref = kMeanFace);

/// Centered moving average over `window` frames: frame t averages
/// [t - window/2, t + window - window/2 - 1], truncated at the ends.
LandmarkTrack smooth_landmarks(const LandmarkTrack& track, int window = 12);

Point mouth_centre(const Landmarks& landmarks);

}  // namespace mouthtrace::preprocess
