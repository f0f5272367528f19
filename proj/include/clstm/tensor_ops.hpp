// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "clstm/tensor.hpp"

namespace clstm {

/// Weights [C_out, C_in, k, k] with odd k, bias [C_out].
template <typename T>
struct ConvKernel {
  Tensor<T> weights;
  Tensor<T> bias;

  ConvKernel() = default;
  ConvKernel(std::size_t c_out, std::size_t c_in, std::size_t k);
  ConvKernel(Tensor<T> w, Tensor<T> b);

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t size() const { return weights.dim(2); }

  void validate() const;
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

/// Same-padded 2-D cross-correlation of a [C_in,H,W] input.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const ConvKernel<T>& kernel);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvKernel<T>& kernel,
                             const Tensor<T>& grad_out);

// Lower-level kernels used by the recurrent cell. `out` and the gradient
// buffers are accumulated into, never overwritten. Weights are [C_out,C_in,k,k].
template <typename T>
void conv2d_accumulate(const Tensor<T>& input, const Tensor<T>& weights, Tensor<T>& out);

/// grad_input may be null when the input gradient is not needed.
template <typename T>
void conv2d_backward_accumulate(const Tensor<T>& input, const Tensor<T>& weights,
                                const Tensor<T>& grad_out, Tensor<T>* grad_input,
                                Tensor<T>& grad_weights);

enum class Activation { kSigmoid, kTanh };

template <typename T>
Tensor<T> activation(Activation kind, const Tensor<T>& x);

/// Gradient through the activation, expressed in terms of its output y.
template <typename T>
Tensor<T> activation_grad(Activation kind, const Tensor<T>& y, const Tensor<T>& grad_out);

template <typename T>
inline T sigmoid(T x) {
  // Split on sign so exp never overflows.
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace clstm
