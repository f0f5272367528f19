// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "clstm/contours.hpp"
#include "clstm/data.hpp"
#include "clstm/errors.hpp"
#include "scenes.hpp"
#include "temp_dir.hpp"

using namespace clstm;
using namespace clstm::scenes;

namespace {

const double kX0 = 8.0, kX1 = 56.0;

double max_point_distance(const Contour& a, const Contour& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    m = std::max(m, std::hypot(a.points[i].x - b.points[i].x, a.points[i].y - b.points[i].y));
  }
  return m;
}

}  // namespace

TEST(Snake, RidgeInitOnRidgeStaysPut) {
  const Frame img = curve_image(kSize, kSize, ridge);
  const auto init = shifted(sample_curve(ridge, kX0, kX1, 32), 0, 0);
  const auto out = snake_extract(img, init, SnakeParams{});
  for (const auto& p : out.points) EXPECT_LT(std::abs(p.y - 32.0), 0.5);
}

TEST(Snake, RidgeOffsetInitConverges) {
  const Frame img = curve_image(kSize, kSize, ridge);
  const auto init = shifted(sample_curve(ridge, kX0, kX1, 32), 0, 3);
  const auto result = snake_solve(img, init, SnakeParams{});
  EXPECT_LT(mean_distance_to_curve(result.contour, ridge, 0, kSize - 1), 1.0);
  for (std::size_t i = 1; i < result.energy.size(); ++i) {
    EXPECT_LE(result.energy[i], result.energy[i - 1] + 1e-6) << "iteration " << i;
  }
}

TEST(Snake, ParabolicArcConverges) {
  const Frame img = curve_image(kSize, kSize, parabola);
  const auto init = shifted(sample_curve(parabola, kX0, kX1, 40), 0, 2);
  const auto out = snake_extract(img, init, SnakeParams{});
  EXPECT_LT(mean_distance_to_curve(out, parabola, 0, kSize - 1), 1.5);
}

TEST(Snake, StaysInBoundsAndIsDeterministic) {
  const Frame img = curve_image(kSize, kSize, [](double) { return 0.5; });
  const auto init = shifted(sample_curve(ridge, 0, kSize - 1, 16), 0, -30);
  const auto a = snake_solve(img, init, SnakeParams{});
  const auto b = snake_solve(img, init, SnakeParams{});
  for (std::size_t i = 0; i < a.contour.points.size(); ++i) {
    EXPECT_EQ(a.contour.points[i], b.contour.points[i]);
    EXPECT_GE(a.contour.points[i].y, 0.0);
    EXPECT_GE(a.contour.points[i].x, 0.0);
    EXPECT_LE(a.contour.points[i].x, kSize - 1.0);
  }
}

TEST(Snake, RejectsBadInput) {
  const Frame img = curve_image(kSize, kSize, ridge);
  EXPECT_THROW(snake_extract(img, shifted(sample_curve(ridge, kX0, 70, 8), 0, 0), SnakeParams{}),
               std::invalid_argument);
  SnakeParams p;
  p.beta = 0.0;
  EXPECT_THROW(snake_extract(img, shifted(sample_curve(ridge, kX0, kX1, 8), 0, 0), p), std::invalid_argument);
  EXPECT_THROW(snake_extract(img, shifted(sample_curve(ridge, kX0, kX1, 2), 0, 0), SnakeParams{}),
               std::invalid_argument);
}

TEST(Snake, InternalEnergyOfStraightEvenLineIsStretchOnly) {
  Contour line = shifted(sample_curve(ridge, 0, 10, 11), 0, 0);
  SnakeParams p;
  p.alpha = 2.0;
  // Ten unit segments, no curvature: alpha/2 * 10.
  EXPECT_NEAR(internal_energy(line, p), 10.0, 1e-12);
}

TEST(Propagate, StaticVideoIsStationary) {
  const Frame img = curve_image(kSize, kSize, parabola);
  const std::vector<Frame> frames(5, img);
  const auto init = shifted(sample_curve(parabola, kX0, kX1, 32), 0, 1);
  const auto out = propagate_contours(frames, init, SnakeParams{});
  ASSERT_EQ(out.size(), frames.size());
  for (const auto& c : out) EXPECT_LT(max_point_distance(c, out[0]), 0.5);
}

TEST(Propagate, TracksTranslatingArc) {
  std::vector<Frame> frames;
  for (int t = 0; t < 8; ++t) frames.push_back(curve_image(kSize, kSize, [t](double x) { return parabola(x) + t; }));
  const auto init = shifted(sample_curve(parabola, kX0, kX1, 32), 0, 0);
  const auto out = propagate_contours(frames, init, SnakeParams{});
  ASSERT_EQ(out.size(), frames.size());
  for (int t = 0; t < 8; ++t) {
    const auto truth = [t](double x) { return parabola(x) + t; };
    EXPECT_LT(mean_distance_to_curve(out[t], truth, 0, kSize - 1), 1.5) << "frame " << t;
  }
}

TEST(InitialContour, FindsBrightestRows) {
  const Frame img = curve_image(kSize, kSize, parabola);
  SnakeParams p;
  p.points = 20;
  const auto c = initial_contour(img, p);
  ASSERT_EQ(c.points.size(), 20u);
  for (const auto& pt : c.points) EXPECT_LE(std::abs(pt.y - parabola(std::round(pt.x))), 1.0);
}

TEST(Rasterize, OutsideContourIsBlack) {
  Contour c{{{-20, -20}, {-10, -30}, {-5, -40}}};
  const Frame f = rasterize_contour(c, 16, 16);
  for (float v : f.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Rasterize, HorizontalLineMakesBand) {
  Contour c{{{0, 10}, {31, 10}}};
  const Frame f = rasterize_contour(c, 24, 32);
  for (std::size_t x = 4; x < 28; ++x) {
    EXPECT_GT(f.at(0, 10, x), 0.5f);
    EXPECT_GT(f.at(0, 10, x), f.at(0, 12, x));
    EXPECT_LT(f.at(0, 18, x), 1e-6f);
    EXPECT_LT(f.at(0, 2, x), 1e-6f);
  }
  for (float v : f.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Rasterize, TranslationCovariantOnInterior) {
  // Dyadic coordinates keep the shifted geometry exact in floating point.
  Contour c{{{10.25, 12.5}, {18.75, 15.0}, {26.5, 13.25}}};
  const int dx = 5, dy = 3;
  Contour moved = c;
  for (auto& p : moved.points) p = {p.x + dx, p.y + dy};
  const Frame a = rasterize_contour(c, 48, 48), b = rasterize_contour(moved, 48, 48);
  for (std::size_t y = 6; y + 6 + dy < 48; ++y) {
    for (std::size_t x = 6; x + 6 + dx < 48; ++x) EXPECT_EQ(a.at(0, y, x), b.at(0, y + dy, x + dx));
  }
}

TEST(ContourText, RoundTripsExactly) {
  clstm::testing::TempDir dir;
  Contour c{{{1.0 / 3.0, 2.5}, {7.125, 1e-9}, {3, 4}}};
  write_contour(dir / "c.txt", c);
  const auto back = read_contour(dir / "c.txt");
  ASSERT_EQ(back.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.points[i], c.points[i]);
  EXPECT_EQ(contour_text(Contour{{{1, 2}}}), "1\n1 2\n");
  EXPECT_THROW(parse_contour("3\n1 2\n"), FormatError);
  EXPECT_THROW(read_contour(dir / "missing.txt"), IoError);
}

TEST(Polyline, DistanceToSegments) {
  const std::vector<Point2> curve{{0, 0}, {10, 0}, {10, 10}};
  EXPECT_DOUBLE_EQ(point_to_polyline({5, 3}, curve), 3.0);
  EXPECT_DOUBLE_EQ(point_to_polyline({13, 5}, curve), 3.0);
  EXPECT_DOUBLE_EQ(point_to_polyline({-3, -4}, curve), 5.0);
}

TEST(DatasetContours, RasterizedTargetsAndRetarget) {
  SynthConfig cfg;
  cfg.videos = 2;
  cfg.frames_per_video = 12;
  cfg.height = 32;
  cfg.width = 32;
  Dataset ds;
  ds.names = {"a", "b"};
  ds.videos = render_synthetic(cfg);
  SnakeParams p;
  p.points = 24;
  const auto set = extract_dataset_contours(ds, p, 2);
  ASSERT_EQ(set.contours.size(), 2u);
  ASSERT_EQ(set.contours[1].size(), 12u);
  ASSERT_EQ(set.rasterized.videos[1].size(), 12u);
  EXPECT_EQ(set.rasterized.videos[1][3], rasterize_contour(set.contours[1][3], 32, 32));

  // Tracking on speckled frames stays near the generator's centreline.
  for (std::size_t t = 0; t < 12; ++t) {
    const auto truth = synthetic_arc(cfg, 0, t, 200);
    std::vector<Point2> curve;
    for (auto [x, y] : truth) curve.push_back({x, y});
    EXPECT_LT(mean_distance(set.contours[0][t], curve), 1.5) << "frame " << t;
  }

  const auto windows = retarget(make_windows(ds, 1, 8), set.rasterized);
  ASSERT_FALSE(windows.empty());
  EXPECT_EQ(windows[0].target, &set.rasterized.videos[0][8]);
  EXPECT_EQ(windows[0].inputs.data(), ds.videos[0].data());
}

TEST(Snake, PinnedEndColumnsKeepExtent) {
  const Frame img = curve_image(kSize, kSize, parabola);
  const auto init = shifted(sample_curve(parabola, kX0, kX1, 32), 0, 1);
  SnakeParams pinned;
  const auto a = snake_extract(img, init, pinned);
  EXPECT_EQ(a.points.front().x, kX0);
  EXPECT_EQ(a.points.back().x, kX1);
  SnakeParams free_ends;
  free_ends.pin_end_columns = false;
  const auto b = snake_extract(img, init, free_ends);
  EXPECT_GT(b.points.front().x, kX0 + 0.5);
  EXPECT_LT(b.points.back().x, kX1 - 0.5);
}
