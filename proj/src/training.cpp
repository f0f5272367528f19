// SPDX-License-Identifier: Apache-2.0
#include "clstm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "clstm/pgm.hpp"

namespace clstm {

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  pred.require_same_shape(target, "mse_loss");
  LossResult<T> out{0.0, Tensor<T>::zeros_like(pred)};
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    out.grad[i] = static_cast<T>(2.0 * d / n);
  }
  out.loss = sum / n;
  return out;
}

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Tensor<T>::zeros_like(*p));
      state.v.push_back(Tensor<T>::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->require_same_shape(*grads[i], "adam_step");
    params[i]->require_same_shape(state.m[i], "adam_step state");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = state.lr * (mj / correction1) / (std::sqrt(vj / correction2) + state.eps);
      p[j] = static_cast<T>(p[j] - update);
    }
  }
}

void TrainConfig::validate() const {
  arch.validate();
  if (batch == 0) throw std::invalid_argument("batch size must be at least 1");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (jobs == 0) throw std::invalid_argument("jobs must be at least 1");
}

namespace {

template <typename T>
void check_windows(const std::vector<SampleWindow>& windows, const Architecture& arch, const char* what) {
  const Shape frame_shape{1, arch.height, arch.width};
  for (const auto& w : windows) {
    if (w.inputs.size() != arch.window || w.target == nullptr || w.offset != arch.offset) {
      throw std::invalid_argument(std::string(what) + " window (video " + std::to_string(w.video) +
                                  ", start " + std::to_string(w.start) +
                                  ") does not match the model's window length or offset");
    }
    if (w.target->shape() != frame_shape || w.inputs.front().shape() != frame_shape) {
      throw ShapeError(std::string(what) + " frames are " + shape_to_string(w.target->shape()) +
                       ", model expects " + shape_to_string(frame_shape));
    }
  }
}

}  // namespace

template <typename T>
double mean_loss(const Model<T>& model, const std::vector<SampleWindow>& windows, std::size_t jobs) {
  std::vector<double> losses(windows.size());
  parallel_for(windows.size(), jobs, [&](std::size_t i) {
    const auto fwd = forward_sequence(to_sequence<T>(windows[i].inputs), model);
    losses[i] = mse_loss(fwd.prediction, windows[i].target->template cast<T>()).loss;
  });
  if (losses.empty()) return 0.0;
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

template <typename T>
TrainResult<T> train(Model<T> model, const TrainConfig& config,
                     const std::vector<SampleWindow>& train_set,
                     const std::vector<SampleWindow>& test_set, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (test_set.empty()) throw std::invalid_argument("test set is empty");
  if (!(model.arch == config.arch)) throw std::invalid_argument("model architecture differs from config");
  check_windows<T>(train_set, config.arch, "training");
  check_windows<T>(test_set, config.arch, "test");

  AdamState<T> adam;
  adam.lr = config.lr;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult<T> result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
      const std::size_t count = std::min(config.batch, order.size() - begin);
      std::vector<Model<T>> sample_grads(count);
      std::vector<double> sample_loss(count);
      parallel_for(count, config.jobs, [&](std::size_t i) {
        const SampleWindow& w = train_set[order[begin + i]];
        const auto fwd = forward_sequence(to_sequence<T>(w.inputs), model);
        const auto loss = mse_loss(fwd.prediction, w.target->template cast<T>());
        sample_loss[i] = loss.loss;
        sample_grads[i] = backward_sequence(fwd, loss.grad, model);
      });
      Model<T> batch_grad = std::move(sample_grads[0]);
      for (std::size_t i = 1; i < count; ++i) batch_grad += sample_grads[i];
      batch_grad *= static_cast<T>(1.0 / static_cast<double>(count));
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::isfinite(sample_loss[i])) {
          const SampleWindow& w = train_set[order[begin + i]];
          throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) +
                              " (video " + std::to_string(w.video) + ", start " +
                              std::to_string(w.start) + ")");
        }
        epoch_loss += sample_loss[i];
      }
      adam_step(model.parameters(), const_cast<const Model<T>&>(batch_grad).parameters(), adam);
    }
    EpochLoss row{epoch, epoch_loss / static_cast<double>(order.size()),
                  mean_loss(model, test_set, config.jobs)};
    if (!std::isfinite(row.test_mse)) {
      throw TrainingError("non-finite test loss at epoch " + std::to_string(epoch));
    }
    result.curve.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.model = std::move(model);
  return result;
}

template <typename T>
TrainResult<T> train(const TrainConfig& config, const std::vector<SampleWindow>& train_set,
                     const std::vector<SampleWindow>& test_set, const EpochCallback& on_epoch) {
  config.validate();
  return train(init_model<T>(config.arch, config.seed), config, train_set, test_set, on_epoch);
}

std::string loss_curve_csv(const std::vector<EpochLoss>& curve) {
  std::string out = "epoch,train_mse,test_mse\n";
  char buf[96];
  for (const auto& row : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", row.epoch, row.train_mse, row.test_mse);
    out += buf;
  }
  return out;
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<EpochLoss>& curve) {
  write_file_atomic(path, loss_curve_csv(curve));
}

#define CLSTM_INSTANTIATE(T)                                                                      \
  template LossResult<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                            \
  template void adam_step(const std::vector<Tensor<T>*>&, const std::vector<const Tensor<T>*>&,   \
                          AdamState<T>&);                                                         \
  template double mean_loss(const Model<T>&, const std::vector<SampleWindow>&, std::size_t);      \
  template TrainResult<T> train(const TrainConfig&, const std::vector<SampleWindow>&,             \
                                const std::vector<SampleWindow>&, const EpochCallback&);          \
  template TrainResult<T> train(Model<T>, const TrainConfig&, const std::vector<SampleWindow>&,   \
                                const std::vector<SampleWindow>&, const EpochCallback&);

CLSTM_INSTANTIATE(float)
CLSTM_INSTANTIATE(double)

}  // namespace clstm
