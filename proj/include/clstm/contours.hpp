// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clstm/data.hpp"

namespace clstm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Open polyline in pixel coordinates (x = column, y = row).
struct Contour {
  std::vector<Point2> points;
};

struct SnakeParams {
  double alpha = 0.1;         // elasticity
  double beta = 0.5;          // rigidity
  double gamma = 1.0;         // step size (inverse)
  double sigma = 2.0;         // Gaussian pre-smoothing, px
  std::size_t iterations = 200;
  double line_weight = 1.0;   // pull toward bright intensity
  double edge_weight = 0.0;   // pull toward strong gradients
  double tolerance = 0.01;    // stop once no point moves farther, px
  std::size_t points = 64;    // used by automatic initialisation
  /// Holds the end points' x at their initial columns. With fully free
  /// ends the elasticity term slowly contracts the snake to a point.
  bool pin_end_columns = true;

  void validate() const;
};

/// Smoothed image and external energy sampled on the pixel grid.
class ExternalField {
 public:
  ExternalField(const Frame& image, const SnakeParams& params);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  /// Bilinear sample of the external energy.
  double energy(double x, double y) const;
  /// Bilinear sample of -grad(energy).
  Point2 force(double x, double y) const;

  const std::vector<double>& smoothed() const { return smoothed_; }

 private:
  double sample(const std::vector<double>& grid, double x, double y) const;

  std::size_t height_, width_;
  std::vector<double> smoothed_;
  std::vector<double> energy_;
  std::vector<double> force_x_, force_y_;
};

/// Internal energy sum_i alpha/2 |v'|^2 + beta/2 |v''|^2 with free ends.
double internal_energy(const Contour& contour, const SnakeParams& params);
double snake_energy(const Contour& contour, const ExternalField& field, const SnakeParams& params);

struct SnakeResult {
  Contour contour;
  std::size_t iterations = 0;
  std::vector<double> energy;  // total energy before the first and after every step
};

/// Semi-implicit open snake: (A + gamma I) v_t = gamma v_{t-1} + F(v_{t-1}).
/// Ends are free in y; in x they are free unless pin_end_columns is set.
SnakeResult snake_solve(const Frame& image, const Contour& init, const SnakeParams& params);
Contour snake_extract(const Frame& image, const Contour& init, const SnakeParams& params);

/// Frame t starts from frame t-1's result.
std::vector<Contour> propagate_contours(std::span<const Frame> frames, const Contour& init,
                                        const SnakeParams& params);

/// Brightest smoothed row in `params.points` evenly spaced columns between
/// margin*W and (1-margin)*W.
Contour initial_contour(const Frame& image, const SnakeParams& params, double margin = 0.1);

/// 2-px stroke at 1.0 on 0.0, then a sigma = 1 px Gaussian blur.
Frame rasterize_contour(const Contour& contour, std::size_t height, std::size_t width);

/// Text format: a line with N, then N lines "x y".
std::string contour_text(const Contour& contour);
Contour parse_contour(const std::string& text);
void write_contour(const std::filesystem::path& path, const Contour& contour);
Contour read_contour(const std::filesystem::path& path);

/// Runs the snake over every video (automatic init on frame 0) and
/// rasterizes the results, giving per-frame contour targets.
struct ContourSet {
  std::vector<std::vector<Contour>> contours;
  Dataset rasterized;
};
ContourSet extract_dataset_contours(const Dataset& dataset, const SnakeParams& params, std::size_t jobs = 1);

/// Re-points each window's target at the same frame index of `targets`.
std::vector<SampleWindow> retarget(std::vector<SampleWindow> windows, const Dataset& targets);

/// Distance from p to the polyline through `curve`.
double point_to_polyline(const Point2& p, const std::vector<Point2>& curve);
double mean_distance(const Contour& contour, const std::vector<Point2>& curve);

}  // namespace clstm
