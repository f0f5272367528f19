// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "clstm/tensor_ops.hpp"

#include "clstm/network.hpp"
#include "oracles.hpp"

using namespace clstm;

namespace {

Architecture small_arch(std::size_t window = 3) {
  Architecture a;
  a.hidden_channels = {2, 2};
  a.kernel_size = 3;
  a.height = 8;
  a.width = 8;
  a.window = window;
  return a;
}

std::vector<Tensor<double>> random_frames(const Architecture& a, std::mt19937_64& rng) {
  std::vector<Tensor<double>> frames;
  for (std::size_t t = 0; t < a.window; ++t) frames.push_back(oracle::random_tensor({1, a.height, a.width}, rng, 0.0, 1.0));
  return frames;
}

/// Gives every bias a random value so no gradient is structurally zero.
Model<double> perturbed_model(const Architecture& a, std::uint64_t seed) {
  auto m = init_model<double>(a, seed);
  std::mt19937_64 rng(seed + 17);
  for (auto* p : m.parameters()) {
    for (auto& v : p->values()) v += std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
  }
  return m;
}

}  // namespace

TEST(Architecture, Validation) {
  Architecture a = small_arch();
  EXPECT_NO_THROW(a.validate());
  a.offset = 4;
  EXPECT_THROW(a.validate(), std::invalid_argument);
  a = small_arch();
  a.kernel_size = 4;
  EXPECT_THROW(a.validate(), ShapeError);
  a = small_arch();
  a.hidden_channels.clear();
  EXPECT_THROW(a.validate(), ShapeError);
}

TEST(Model, ParameterOrderAndShapes) {
  const Architecture a = small_arch();
  Model<double> m(a);
  const auto params = m.parameters();
  ASSERT_EQ(params.size(), 3 * a.num_layers() + 2);
  EXPECT_EQ(params[0]->shape(), (Shape{8, 1, 3, 3}));
  EXPECT_EQ(params[1]->shape(), (Shape{8, 2, 3, 3}));
  EXPECT_EQ(params[2]->shape(), (Shape{8}));
  EXPECT_EQ(params[3]->shape(), (Shape{8, 2, 3, 3}));
  EXPECT_EQ(params[6]->shape(), (Shape{1, 2, 3, 3}));
  EXPECT_EQ(params[7]->shape(), (Shape{1}));
}

TEST(Model, InitIsDeterministic) {
  const auto a = init_model<float>(small_arch(), 3), b = init_model<float>(small_arch(), 3);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
  EXPECT_FALSE(a.layers[0].hidden == init_model<float>(small_arch(), 4).layers[0].hidden);
}

TEST(ForwardSequence, MatchesUnrolledOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = small_arch(4);
    const auto m = perturbed_model(a, 10 + trial);
    const auto frames = random_frames(a, rng);
    const auto fwd = forward_sequence(frames, m);
    EXPECT_LT(oracle::max_abs_diff(fwd.prediction, oracle::network_forward(frames, m)), 1e-12);
    ASSERT_EQ(fwd.caches.size(), a.window);
    EXPECT_EQ(fwd.caches[0].size(), a.num_layers());
  }
}

TEST(ForwardSequence, RejectsWrongInputs) {
  const auto a = small_arch();
  Model<double> m(a);
  std::mt19937_64 rng(1);
  auto frames = random_frames(a, rng);
  frames.pop_back();
  EXPECT_THROW(forward_sequence(frames, m), ShapeError);
  frames.push_back(Tensor<double>(Shape{1, 8, 9}));
  EXPECT_THROW(forward_sequence(frames, m), ShapeError);
}

TEST(BackwardSequence, MatchesFiniteDifferencesForEveryParameter) {
  const auto a = small_arch(3);
  std::mt19937_64 rng(8);
  const auto frames = random_frames(a, rng);
  const auto target = oracle::random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  const auto check = oracle::network_gradient_check(perturbed_model(a, 2), frames, target);
  EXPECT_EQ(check.checked, 539u);
  EXPECT_LT(check.max_relative_error, 1e-4) << "worst at " << check.worst;
}

TEST(BackwardSequence, IsLinearInCotangent) {
  const auto a = small_arch(2);
  std::mt19937_64 rng(9);
  const auto m = perturbed_model(a, 4);
  const auto fwd = forward_sequence(random_frames(a, rng), m);
  const auto g = oracle::random_tensor({1, 8, 8}, rng);
  Tensor<double> g3 = g;
  g3 *= 3.0;
  const auto one = backward_sequence(fwd, g, m), three = backward_sequence(fwd, g3, m);
  const auto p1 = one.parameters(), p3 = three.parameters();
  for (std::size_t p = 0; p < p1.size(); ++p) {
    for (std::size_t i = 0; i < p1[p]->size(); ++i) EXPECT_NEAR((*p3[p])[i], 3.0 * (*p1[p])[i], 1e-12);
  }
}

TEST(Predict, ClampsToUnitInterval) {
  auto a = small_arch(2);
  Model<float> m(a);
  m.head.bias[0] = 5.0f;
  std::vector<Frame> frames(2, Frame(Shape{1, 8, 8}, 0.5f));
  const Frame high = predict<float>(frames, m);
  for (float v : high.values()) EXPECT_EQ(v, 1.0f);
  m.head.bias[0] = -5.0f;
  const Frame low = predict<float>(frames, m);
  for (float v : low.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Model, CastRoundTripsThroughDouble) {
  const auto m = init_model<float>(small_arch(), 1);
  const auto back = m.cast<double>().cast<float>();
  const auto pa = m.parameters(), pb = back.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
}

TEST(ForwardSequence, ZeroModelPredictsHeadBias) {
  const auto a = small_arch();
  Model<double> m(a);
  std::mt19937_64 rng(3);
  const auto pred = forward_sequence(random_frames(a, rng), m).prediction;
  for (double v : pred.values()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardSequence, OutputShapeForRandomArchitectures) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> layers(1, 3), ch(1, 3), side(3, 9), win(1, 4), kidx(0, 2);
  for (int trial = 0; trial < 15; ++trial) {
    Architecture a;
    a.hidden_channels.assign(layers(rng), 0);
    for (auto& c : a.hidden_channels) c = ch(rng);
    a.kernel_size = 1 + 2 * kidx(rng);
    a.height = side(rng);
    a.width = side(rng);
    a.window = win(rng);
    const auto m = init_model<double>(a, trial);
    const auto pred = forward_sequence(random_frames(a, rng), m).prediction;
    EXPECT_EQ(pred.shape(), (Shape{1, a.height, a.width}));
  }
}

TEST(ForwardSequence, OrderSensitive) {
  const auto a = small_arch(4);
  std::mt19937_64 rng(6);
  const auto m = perturbed_model(a, 7);
  auto frames = random_frames(a, rng);
  const auto forward = forward_sequence(frames, m).prediction;
  std::reverse(frames.begin(), frames.end());
  const auto reversed = forward_sequence(frames, m).prediction;
  EXPECT_GT(oracle::max_abs_diff(forward, reversed), 1e-6);
}

TEST(BackwardSequence, ZeroCotangentGivesZeroGradients) {
  const auto a = small_arch();
  std::mt19937_64 rng(4);
  const auto m = perturbed_model(a, 1);
  const auto fwd = forward_sequence(random_frames(a, rng), m);
  const auto g = backward_sequence(fwd, Tensor<double>(Shape{1, 8, 8}), m);
  for (const auto* p : g.parameters()) {
    for (double v : p->values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(BackwardSequence, SingleStepSingleLayerIsCellPlusHead) {
  Architecture a = small_arch(1);
  a.hidden_channels = {3};
  std::mt19937_64 rng(10);
  const auto m = perturbed_model(a, 5);
  const auto frames = random_frames(a, rng);
  const auto g_pred = oracle::random_tensor({1, 8, 8}, rng);
  const auto grads = backward_sequence(forward_sequence(frames, m), g_pred, m);

  const auto step = cell_forward(frames[0], CellState<double>::zeros(3, 8, 8), m.layers[0]);
  const auto head = conv2d_backward(step.next.h, m.head, g_pred);
  CellParams<double> dcell(1, 3, 3);
  cell_backward(head.input, Tensor<double>(Shape{3, 8, 8}), step.cache, m.layers[0], dcell, false);

  EXPECT_LT(oracle::max_abs_diff(grads.head.weights, head.weights), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(grads.head.bias, head.bias), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(grads.layers[0].input.weights, dcell.input.weights), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(grads.layers[0].hidden, dcell.hidden), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(grads.layers[0].input.bias, dcell.input.bias), 1e-12);
}
