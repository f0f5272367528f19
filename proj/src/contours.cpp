// SPDX-License-Identifier: Apache-2.0
#include "clstm/contours.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "clstm/errors.hpp"
#include "clstm/parallel.hpp"
#include "clstm/pgm.hpp"

namespace clstm {

void SnakeParams::validate() const {
  if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0 && sigma > 0.0)) {
    throw std::invalid_argument("snake alpha, beta, gamma and sigma must be positive");
  }
  if (points < 3) throw std::invalid_argument("a snake needs at least 3 points");
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable blur. Samples beyond the border are either zero or the nearest
// edge pixel.
std::vector<double> blur(const std::vector<double>& src, std::size_t h, std::size_t w, double sigma,
                         bool replicate) {
  const auto k = gaussian_kernel(sigma);
  const long r = static_cast<long>(k.size() / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  std::vector<double> tmp(h * w, 0.0), out(h * w, 0.0);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (long d = -r; d <= r; ++d) {
        long sx = x + d;
        if (sx < 0 || sx >= W) {
          if (!replicate) continue;
          sx = std::clamp(sx, 0L, W - 1);
        }
        s += k[d + r] * src[y * W + sx];
      }
      tmp[y * W + x] = s;
    }
  }
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (long d = -r; d <= r; ++d) {
        long sy = y + d;
        if (sy < 0 || sy >= H) {
          if (!replicate) continue;
          sy = std::clamp(sy, 0L, H - 1);
        }
        s += k[d + r] * tmp[sy * W + x];
      }
      out[y * W + x] = s;
    }
  }
  return out;
}

using Band = std::vector<std::array<double, 3>>;  // row i: {M(i,i), M(i,i-1), M(i,i-2)}

// Lower band of A + gamma I for an open snake with free ends.
Band snake_matrix(std::size_t n, const SnakeParams& p) {
  Band m(n, {0.0, 0.0, 0.0});
  auto add_row = [&](std::size_t first, std::initializer_list<double> coeffs) {
    const std::vector<double> c(coeffs);
    for (std::size_t a = 0; a < c.size(); ++a) {
      for (std::size_t b = 0; b <= a; ++b) m[first + a][a - b] += c[a] * c[b];
    }
  };
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double s = std::sqrt(p.alpha);
    add_row(i, {-s, s});
  }
  for (std::size_t i = 0; i + 2 < n; ++i) {
    const double s = std::sqrt(p.beta);
    add_row(i, {s, -2.0 * s, s});
  }
  for (auto& row : m) row[0] += p.gamma;
  return m;
}

// Principal submatrix without the first and last rows and columns.
Band interior(const Band& m) {
  Band sub(m.begin() + 1, m.end() - 1);
  sub[0][1] = sub[0][2] = 0.0;
  if (sub.size() > 1) sub[1][2] = 0.0;
  return sub;
}

// Cholesky factor of a symmetric positive definite pentadiagonal matrix,
// stored as band[i] = {L(i,i), L(i,i-1), L(i,i-2)}.
class PentadiagonalCholesky {
 public:
  explicit PentadiagonalCholesky(const Band& m) : band_(m.size()) {
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = std::min<std::size_t>(2, i) + 1; d-- > 0;) {
        const std::size_t j = i - d;
        double s = m[i][d];
        for (std::size_t k = (i >= 2 ? i - 2 : 0); k < j; ++k) s -= at(i, k) * at(j, k);
        if (d == 0) {
          assert(s > 0.0 && "A + gamma I is positive definite for gamma > 0");
          band_[i][0] = std::sqrt(s);
        } else {
          band_[i][d] = s / band_[j][0];
        }
      }
    }
  }

  void solve(std::vector<double>& b) const {
    const std::size_t n = band_.size();
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i];
      for (std::size_t d = 1; d <= std::min<std::size_t>(2, i); ++d) s -= band_[i][d] * b[i - d];
      b[i] = s / band_[i][0];
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = b[i];
      for (std::size_t d = 1; d <= 2 && i + d < n; ++d) s -= band_[i + d][d] * b[i + d];
      b[i] = s / band_[i][0];
    }
  }

 private:
  double at(std::size_t i, std::size_t j) const { return i - j <= 2 ? band_[i][i - j] : 0.0; }
  std::vector<std::array<double, 3>> band_;
};

void check_in_bounds(const Contour& c, std::size_t h, std::size_t w) {
  for (const auto& p : c.points) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(w - 1) &&
          p.y <= static_cast<double>(h - 1))) {
      throw std::invalid_argument("snake initial point (" + std::to_string(p.x) + ", " +
                                  std::to_string(p.y) + ") lies outside the image");
    }
  }
}

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

ExternalField::ExternalField(const Frame& image, const SnakeParams& params)
    : height_(image.dim(1)), width_(image.dim(2)) {
  if (image.rank() != 3 || image.dim(0) != 1) throw ShapeError("snake expects a [1,H,W] frame");
  std::vector<double> raw(image.values().begin(), image.values().end());
  smoothed_ = blur(raw, height_, width_, params.sigma, true);

  const long H = static_cast<long>(height_), W = static_cast<long>(width_);
  auto diff = [&](const std::vector<double>& g, long y, long x, bool along_x) {
    const long lo = along_x ? std::max(0L, x - 1) : std::max(0L, y - 1);
    const long hi = along_x ? std::min(W - 1, x + 1) : std::min(H - 1, y + 1);
    if (hi == lo) return 0.0;
    const double a = along_x ? g[y * W + lo] : g[lo * W + x];
    const double b = along_x ? g[y * W + hi] : g[hi * W + x];
    return (b - a) / static_cast<double>(hi - lo);
  };

  energy_.assign(height_ * width_, 0.0);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double e = -params.line_weight * smoothed_[y * W + x];
      if (params.edge_weight != 0.0) {
        const double gx = diff(smoothed_, y, x, true), gy = diff(smoothed_, y, x, false);
        e -= params.edge_weight * (gx * gx + gy * gy);
      }
      energy_[y * W + x] = e;
    }
  }
  force_x_.assign(height_ * width_, 0.0);
  force_y_.assign(height_ * width_, 0.0);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      force_x_[y * W + x] = -diff(energy_, y, x, true);
      force_y_[y * W + x] = -diff(energy_, y, x, false);
    }
  }
}

double ExternalField::sample(const std::vector<double>& grid, double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const std::size_t x0 = std::min(static_cast<std::size_t>(x), width_ - 1);
  const std::size_t y0 = std::min(static_cast<std::size_t>(y), height_ - 1);
  const std::size_t x1 = std::min(x0 + 1, width_ - 1), y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
  const double top = grid[y0 * width_ + x0] * (1 - fx) + grid[y0 * width_ + x1] * fx;
  const double bottom = grid[y1 * width_ + x0] * (1 - fx) + grid[y1 * width_ + x1] * fx;
  return top * (1 - fy) + bottom * fy;
}

double ExternalField::energy(double x, double y) const { return sample(energy_, x, y); }

Point2 ExternalField::force(double x, double y) const {
  return {sample(force_x_, x, y), sample(force_y_, x, y)};
}

double internal_energy(const Contour& contour, const SnakeParams& params) {
  const auto& v = contour.points;
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double dx = v[i + 1].x - v[i].x, dy = v[i + 1].y - v[i].y;
    e += 0.5 * params.alpha * (dx * dx + dy * dy);
  }
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const double dx = v[i - 1].x - 2 * v[i].x + v[i + 1].x;
    const double dy = v[i - 1].y - 2 * v[i].y + v[i + 1].y;
    e += 0.5 * params.beta * (dx * dx + dy * dy);
  }
  return e;
}

double snake_energy(const Contour& contour, const ExternalField& field, const SnakeParams& params) {
  double e = internal_energy(contour, params);
  for (const auto& p : contour.points) e += field.energy(p.x, p.y);
  return e;
}

SnakeResult snake_solve(const Frame& image, const Contour& init, const SnakeParams& params) {
  params.validate();
  if (init.points.size() < 3) throw std::invalid_argument("a snake needs at least 3 points");
  const ExternalField field(image, params);
  check_in_bounds(init, field.height(), field.width());

  const std::size_t n = init.points.size();
  const Band full = snake_matrix(n, params);
  const PentadiagonalCholesky system(full);
  const PentadiagonalCholesky inner(interior(full));
  const double pinned_first = init.points.front().x, pinned_last = init.points.back().x;
  std::vector<double> inner_x(n - 2);
  const double max_x = static_cast<double>(field.width() - 1);
  const double max_y = static_cast<double>(field.height() - 1);

  SnakeResult result;
  result.contour = init;
  result.energy.push_back(snake_energy(result.contour, field, params));
  std::vector<double> bx(n), by(n);
  for (std::size_t it = 0; it < params.iterations; ++it) {
    auto& v = result.contour.points;
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 f = field.force(v[i].x, v[i].y);
      bx[i] = params.gamma * v[i].x + f.x;
      by[i] = params.gamma * v[i].y + f.y;
    }
    if (params.pin_end_columns) {
      // Move the known end columns to the right-hand side.
      for (std::size_t i = 0; i + 2 < n; ++i) inner_x[i] = bx[i + 1];
      inner_x[0] -= full[1][1] * pinned_first;
      if (n > 3) inner_x[1] -= full[2][2] * pinned_first;
      inner_x[n - 3] -= full[n - 1][1] * pinned_last;
      if (n > 3) inner_x[n - 4] -= full[n - 1][2] * pinned_last;
      inner.solve(inner_x);
      bx.front() = pinned_first;
      bx.back() = pinned_last;
      for (std::size_t i = 0; i + 2 < n; ++i) bx[i + 1] = inner_x[i];
    } else {
      system.solve(bx);
    }
    system.solve(by);
    double moved = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 next{std::clamp(bx[i], 0.0, max_x), std::clamp(by[i], 0.0, max_y)};
      moved = std::max(moved, std::hypot(next.x - v[i].x, next.y - v[i].y));
      v[i] = next;
    }
    ++result.iterations;
    result.energy.push_back(snake_energy(result.contour, field, params));
    if (moved < params.tolerance) break;
  }
  return result;
}

Contour snake_extract(const Frame& image, const Contour& init, const SnakeParams& params) {
  return snake_solve(image, init, params).contour;
}

std::vector<Contour> propagate_contours(std::span<const Frame> frames, const Contour& init,
                                        const SnakeParams& params) {
  if (frames.empty()) throw std::invalid_argument("propagate_contours needs at least one frame");
  std::vector<Contour> out;
  out.reserve(frames.size());
  const Contour* previous = &init;
  for (const auto& frame : frames) {
    out.push_back(snake_extract(frame, *previous, params));
    previous = &out.back();
  }
  return out;
}

Contour initial_contour(const Frame& image, const SnakeParams& params, double margin) {
  params.validate();
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<double> raw(image.values().begin(), image.values().end());
  const auto smooth = blur(raw, h, w, params.sigma, true);
  const double x0 = margin * static_cast<double>(w - 1);
  const double x1 = (1.0 - margin) * static_cast<double>(w - 1);
  Contour c;
  for (std::size_t i = 0; i < params.points; ++i) {
    const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(params.points - 1);
    const std::size_t col = std::min(static_cast<std::size_t>(std::lround(x)), w - 1);
    std::size_t best = 0;
    for (std::size_t y = 1; y < h; ++y) {
      if (smooth[y * w + col] > smooth[best * w + col]) best = y;
    }
    c.points.push_back({x, static_cast<double>(best)});
  }
  return c;
}

Frame rasterize_contour(const Contour& contour, std::size_t height, std::size_t width) {
  constexpr double kHalfStroke = 1.0;
  std::vector<double> canvas(height * width, 0.0);
  const auto& pts = contour.points;
  const std::size_t segments = pts.size() > 1 ? pts.size() - 1 : pts.size();
  for (std::size_t s = 0; s < segments; ++s) {
    const Point2& a = pts[s];
    const Point2& b = pts.size() > 1 ? pts[s + 1] : pts[s];
    const double lo_x = std::floor(std::min(a.x, b.x) - kHalfStroke);
    const double hi_x = std::ceil(std::max(a.x, b.x) + kHalfStroke);
    const double lo_y = std::floor(std::min(a.y, b.y) - kHalfStroke);
    const double hi_y = std::ceil(std::max(a.y, b.y) + kHalfStroke);
    const long x_begin = static_cast<long>(std::max(lo_x, 0.0));
    const long x_end = static_cast<long>(std::min(hi_x, static_cast<double>(width) - 1.0));
    const long y_begin = static_cast<long>(std::max(lo_y, 0.0));
    const long y_end = static_cast<long>(std::min(hi_y, static_cast<double>(height) - 1.0));
    for (long y = y_begin; y <= y_end; ++y) {
      for (long x = x_begin; x <= x_end; ++x) {
        if (segment_distance({static_cast<double>(x), static_cast<double>(y)}, a, b) <= kHalfStroke) {
          canvas[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] = 1.0;
        }
      }
    }
  }
  const auto blurred = blur(canvas, height, width, 1.0, false);
  Frame out(Shape{1, height, width});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(std::clamp(blurred[i], 0.0, 1.0));
  return out;
}

std::string contour_text(const Contour& contour) {
  std::string out = std::to_string(contour.points.size()) + "\n";
  char buf[96];
  for (const auto& p : contour.points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x, p.y);
    out += buf;
  }
  return out;
}

Contour parse_contour(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  if (!(in >> n)) throw FormatError("contour file lacks a point count");
  Contour c;
  c.points.resize(n);
  for (auto& p : c.points) {
    if (!(in >> p.x >> p.y)) throw FormatError("contour file has fewer than " + std::to_string(n) + " points");
  }
  return c;
}

void write_contour(const std::filesystem::path& path, const Contour& contour) {
  write_file_atomic(path, contour_text(contour));
}

Contour read_contour(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_contour(ss.str());
}

ContourSet extract_dataset_contours(const Dataset& dataset, const SnakeParams& params, std::size_t jobs) {
  ContourSet out;
  out.contours.resize(dataset.size());
  out.rasterized.names = dataset.names;
  out.rasterized.videos.resize(dataset.size());
  parallel_for(dataset.size(), jobs, [&](std::size_t v) {
    const Video& video = dataset.videos[v];
    if (video.empty()) return;
    out.contours[v] = propagate_contours(video, initial_contour(video.front(), params), params);
    for (const auto& c : out.contours[v]) {
      out.rasterized.videos[v].push_back(rasterize_contour(c, video.front().dim(1), video.front().dim(2)));
    }
  });
  return out;
}

std::vector<SampleWindow> retarget(std::vector<SampleWindow> windows, const Dataset& targets) {
  for (auto& w : windows) {
    const std::size_t index = w.start + w.inputs.size() - 1 + w.offset;
    if (w.video >= targets.size() || index >= targets.videos[w.video].size()) {
      throw std::invalid_argument("target dataset does not cover window (video " + std::to_string(w.video) +
                                  ", frame " + std::to_string(index) + ")");
    }
    w.target = &targets.videos[w.video][index];
  }
  return windows;
}

double point_to_polyline(const Point2& p, const std::vector<Point2>& curve) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) best = std::min(best, segment_distance(p, curve[i], curve[i + 1]));
  if (curve.size() == 1) best = segment_distance(p, curve[0], curve[0]);
  return best;
}

double mean_distance(const Contour& contour, const std::vector<Point2>& curve) {
  double sum = 0.0;
  for (const auto& p : contour.points) sum += point_to_polyline(p, curve);
  return sum / static_cast<double>(contour.points.size());
}

}  // namespace clstm
