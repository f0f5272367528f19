// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "clstm/data.hpp"
#include "clstm/evaluation.hpp"
#include "clstm/training.hpp"
#include "oracles.hpp"

using namespace clstm;

namespace {

Architecture tiny_arch() {
  Architecture a;
  a.hidden_channels = {2};
  a.kernel_size = 3;
  a.height = 8;
  a.width = 8;
  a.window = 3;
  return a;
}

Dataset constant_dataset(std::size_t videos, std::size_t frames, float value) {
  Dataset ds;
  for (std::size_t v = 0; v < videos; ++v) {
    ds.names.push_back("v" + std::to_string(v));
    ds.videos.emplace_back(frames, Frame(Shape{1, 8, 8}, value));
  }
  return ds;
}

Dataset noisy_dataset(std::size_t videos, std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Dataset ds;
  for (std::size_t v = 0; v < videos; ++v) {
    ds.names.push_back("v" + std::to_string(v));
    Video vid;
    for (std::size_t t = 0; t < frames; ++t) {
      Frame f(Shape{1, 8, 8});
      for (auto& x : f.values()) x = u(rng);
      vid.push_back(f);
    }
    ds.videos.push_back(vid);
  }
  return ds;
}

}  // namespace

TEST(MseLoss, IdenticalInputsGiveZero) {
  const Tensor<double> a(Shape{1, 3, 3}, 0.25);
  const auto r = mse_loss(a, a);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(MseLoss, OnesVersusZerosIsOne) {
  EXPECT_EQ(mse_loss(Tensor<double>(Shape{1, 4, 4}, 1.0), Tensor<double>(Shape{1, 4, 4})).loss, 1.0);
  EXPECT_THROW(mse_loss(Tensor<double>(Shape{1, 4, 4}), Tensor<double>(Shape{1, 4, 5})), ShapeError);
}

TEST(MseLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  auto pred = oracle::random_tensor({1, 5, 6}, rng);
  const auto target = oracle::random_tensor({1, 5, 6}, rng);
  const auto grad = mse_loss(pred, target).grad;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double numeric = oracle::central_difference(pred[i], 1e-3, [&] { return mse_loss(pred, target).loss; });
    EXPECT_LT(oracle::relative_error(grad[i], numeric), 1e-8);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor<double> p(Shape{3}, 0.7);
  const Tensor<double> g(Shape{3});
  AdamState<double> st;
  adam_step<double>({&p}, {&g}, st);
  for (double v : p.values()) EXPECT_EQ(v, 0.7);
}

TEST(Adam, FirstStepIsLearningRate) {
  Tensor<double> p(Shape{1}, 0.0);
  const Tensor<double> g(Shape{1}, 1.0);
  AdamState<double> st;
  adam_step<double>({&p}, {&g}, st);
  EXPECT_NEAR(p[0], -0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, MatchesScalarTranscription) {
  Tensor<double> p(Shape{1}, 1.0);
  double ref = 1.0, m = 0.0, v = 0.0;
  AdamState<double> st;
  st.lr = 0.05;
  for (int t = 1; t <= 50; ++t) {
    const Tensor<double> g(Shape{1}, 2.0 * (p[0] - 3.0));
    adam_step<double>({&p}, {&g}, st);
    const double gr = 2.0 * (ref - 3.0);
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    ref -= 0.05 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    ASSERT_NEAR(p[0], ref, 1e-12) << "step " << t;
  }
  EXPECT_LT(std::abs(p[0] - 3.0), std::abs(1.0 - 3.0));
}

TEST(Adam, RejectsMismatch) {
  Tensor<double> p(Shape{2});
  const Tensor<double> g(Shape{3});
  AdamState<double> st;
  EXPECT_THROW(adam_step<double>({&p}, {&g}, st), ShapeError);
}

TEST(Train, ConstantVideosFitQuickly) {
  const Dataset ds = constant_dataset(6, 30, 0.4f);
  const auto windows = make_windows(ds, 1, 3);
  TrainConfig cfg;
  cfg.arch = tiny_arch();
  cfg.lr = 0.01;
  cfg.batch = 4;
  cfg.epochs = 5;
  const auto result = train<float>(cfg, windows, windows);
  ASSERT_EQ(result.curve.size(), 5u);
  EXPECT_LT(result.curve.back().train_mse, 1e-4);
}

TEST(Train, ConstantVideoModelPredictsTheConstant) {
  const Dataset ds = constant_dataset(6, 30, 0.4f);
  const auto windows = make_windows(ds, 1, 3);
  TrainConfig cfg;
  cfg.arch = tiny_arch();
  cfg.lr = 0.01;
  cfg.batch = 4;
  cfg.epochs = 20;
  const auto result = train<float>(cfg, windows, windows);
  const Frame pred = predict<float>(windows[0].inputs, result.model);
  EXPECT_LT(mse_8bit(pred, *windows[0].target), 1.0);
}

TEST(Train, JobCountDoesNotChangeResult) {
  const Dataset ds = noisy_dataset(2, 14, 4);
  const auto windows = make_windows(ds, 1, 3);
  TrainConfig cfg;
  cfg.arch = tiny_arch();
  cfg.batch = 5;
  cfg.epochs = 2;
  cfg.jobs = 1;
  const auto one = train<float>(cfg, windows, windows);
  cfg.jobs = 3;
  const auto three = train<float>(cfg, windows, windows);
  const auto p1 = one.model.parameters(), p3 = three.model.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(*p1[i], *p3[i]);
  EXPECT_EQ(one.curve[1].train_mse, three.curve[1].train_mse);
}

TEST(Train, RejectsBadInputs) {
  const Dataset ds = noisy_dataset(1, 10, 1);
  const auto windows = make_windows(ds, 1, 3);
  TrainConfig cfg;
  cfg.arch = tiny_arch();
  cfg.epochs = 1;
  EXPECT_THROW(train<float>(cfg, {}, windows), std::invalid_argument);
  cfg.arch.offset = 2;
  EXPECT_THROW(train<float>(cfg, windows, windows), std::invalid_argument);
  cfg.arch = tiny_arch();
  cfg.arch.width = 9;
  EXPECT_THROW(train<float>(cfg, windows, windows), ShapeError);
}

TEST(Train, NonFiniteLossAborts) {
  Dataset ds = noisy_dataset(1, 10, 1);
  ds.videos[0][5][0] = std::numeric_limits<float>::quiet_NaN();
  const auto windows = make_windows(ds, 1, 3);
  TrainConfig cfg;
  cfg.arch = tiny_arch();
  cfg.epochs = 1;
  EXPECT_THROW(train<float>(cfg, windows, windows), TrainingError);
}

TEST(LossCurve, CsvHasOneRowPerEpoch) {
  const Dataset ds = noisy_dataset(1, 8, 3);
  const auto windows = make_windows(ds, 1, 3);
  TrainConfig cfg;
  cfg.arch = tiny_arch();
  cfg.epochs = 3;
  std::size_t callbacks = 0;
  const auto result = train<float>(cfg, windows, windows, [&](const EpochLoss&) { ++callbacks; });
  EXPECT_EQ(callbacks, 3u);
  std::istringstream csv(loss_curve_csv(result.curve));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,train_mse,test_mse");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u) << line;
  }
  EXPECT_EQ(rows, 3u);
}
