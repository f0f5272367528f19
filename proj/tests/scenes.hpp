// SPDX-License-Identifier: Apache-2.0
//
// Synthetic images with analytically known bright curves.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "clstm/contours.hpp"

namespace clstm::scenes {

/// Bright Gaussian profile of standard deviation `width` around y = curve(x).
inline Frame curve_image(std::size_t h, std::size_t w, const std::function<double(double)>& curve,
                         double width = 1.5, double background = 0.1, double peak = 0.9) {
  Frame f(Shape{1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double d = static_cast<double>(y) - curve(static_cast<double>(x));
      f.at(0, y, x) = static_cast<float>(background + (peak - background) * std::exp(-d * d / (2 * width * width)));
    }
  }
  return f;
}

/// `n` points of y = curve(x) for x evenly spaced on [x0, x1].
inline std::vector<Point2> sample_curve(const std::function<double(double)>& curve, double x0, double x1,
                                        std::size_t n) {
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(n - 1);
    pts.push_back({x, curve(x)});
  }
  return pts;
}

inline Contour shifted(const std::vector<Point2>& pts, double dx, double dy) {
  Contour c;
  for (const auto& p : pts) c.points.push_back({p.x + dx, p.y + dy});
  return c;
}

/// Distance from p to y = curve(x), x in [x0, x1], by dense sampling.
inline double distance_to_curve(const Point2& p, const std::function<double(double)>& curve, double x0,
                                double x1, std::size_t samples = 20000) {
  double best = 1e300;
  for (std::size_t i = 0; i <= samples; ++i) {
    const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(samples);
    best = std::min(best, std::hypot(p.x - x, p.y - curve(x)));
  }
  return best;
}

inline double mean_distance_to_curve(const Contour& c, const std::function<double(double)>& curve, double x0,
                                     double x1) {
  double sum = 0.0;
  for (const auto& p : c.points) sum += distance_to_curve(p, curve, x0, x1);
  return sum / static_cast<double>(c.points.size());
}

inline constexpr std::size_t kSize = 64;

/// Horizontal ridge at row 32 of a 64x64 image.
inline double ridge(double) { return 32.0; }

/// Downward-opening parabolic arc spanning the image.
inline double parabola(double x) { return 22.0 + 0.012 * (x - 32.0) * (x - 32.0); }

}  // namespace clstm::scenes
