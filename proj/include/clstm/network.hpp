// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "clstm/cell.hpp"

namespace clstm {

using Frame = Tensor<float>;  // [1,H,W], values in [0,1]

struct Architecture {
  std::vector<std::size_t> hidden_channels{8, 8, 8};
  std::size_t kernel_size = 3;
  std::size_t height = 96;
  std::size_t width = 96;
  std::size_t window = 8;
  std::size_t offset = 1;

  std::size_t num_layers() const { return hidden_channels.size(); }
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Stacked ConvLSTM layers plus a linear same-padded conv head on the top
/// layer's final hidden state.
template <typename T>
struct Model {
  Architecture arch;
  std::vector<CellParams<T>> layers;
  ConvKernel<T> head;

  Model() = default;
  /// Zero-initialised model of the given shape.
  explicit Model(Architecture a);

  /// Fixed traversal order shared by the optimizer and gradient folds.
  std::vector<Tensor<T>*> parameters();
  std::vector<const Tensor<T>*> parameters() const;

  Model& operator+=(const Model& other);
  Model& operator*=(T s);
  void set_zero();

  template <typename U>
  Model<U> cast() const;
};

template <typename T>
Model<T> init_model(const Architecture& arch, std::uint64_t seed);

template <typename T>
struct SequenceForward {
  Tensor<T> prediction;                          // [1,H,W], unclamped
  std::vector<std::vector<CellCache<T>>> caches;  // [time][layer]
};

/// `frames` holds arch.window tensors of shape [1,H,W].
template <typename T>
SequenceForward<T> forward_sequence(const std::vector<Tensor<T>>& frames, const Model<T>& model);

/// BPTT through the whole stack. Returns gradients in a zero-initialised
/// model of the same architecture.
template <typename T>
Model<T> backward_sequence(const SequenceForward<T>& forward, const Tensor<T>& grad_prediction,
                           const Model<T>& model);

/// Converts input frames to the model's scalar type.
template <typename T>
std::vector<Tensor<T>> to_sequence(std::span<const Frame> frames);

/// Forward pass clamped to [0,1] for emission as an image.
template <typename T>
Frame predict(std::span<const Frame> window, const Model<T>& model);

}  // namespace clstm
