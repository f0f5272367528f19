// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clstm/data.hpp"
#include "clstm/network.hpp"
#include "clstm/parallel.hpp"

namespace clstm {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

/// Mean squared error over all pixels; grad = 2 (pred - target) / N.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// Bias-corrected Adam update. Moment buffers are created on the first call.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state);

struct TrainConfig {
  Architecture arch;
  double lr = 0.001;
  std::size_t batch = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  void validate() const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  double train_mse = 0.0;  // normalized [0,1] scale
  double test_mse = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct TrainResult {
  Model<T> model;
  std::vector<EpochLoss> curve;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mini-batch training from a seeded initialization. Per-sample gradients
/// are folded in sample order, so results do not depend on `jobs`.
template <typename T>
TrainResult<T> train(const TrainConfig& config, const std::vector<SampleWindow>& train_set,
                     const std::vector<SampleWindow>& test_set, const EpochCallback& on_epoch = {});

/// Continues training an existing model.
template <typename T>
TrainResult<T> train(Model<T> model, const TrainConfig& config,
                     const std::vector<SampleWindow>& train_set,
                     const std::vector<SampleWindow>& test_set, const EpochCallback& on_epoch = {});

/// Mean normalized MSE of the unclamped predictions.
template <typename T>
double mean_loss(const Model<T>& model, const std::vector<SampleWindow>& windows, std::size_t jobs = 1);

std::string loss_curve_csv(const std::vector<EpochLoss>& curve);
void write_loss_curve(const std::filesystem::path& path, const std::vector<EpochLoss>& curve);

}  // namespace clstm
