// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "clstm/tensor_ops.hpp"

namespace clstm {

/// Gate blocks are stacked along the output-channel axis in this order.
enum class Gate : std::size_t { kInput = 0, kForget = 1, kCandidate = 2, kOutput = 3 };
inline constexpr std::size_t kNumGates = 4;

/**
 * ConvLSTM layer parameters.
 *
 * The four input-to-gate kernels W_xi, W_xf, W_xc, W_xo are stored as one
 * [4*C_hid, C_in, k, k] kernel whose bias holds b_i, b_f, b_c, b_o. The
 * hidden-to-gate kernels W_hi..W_ho are stored as [4*C_hid, C_hid, k, k] and
 * carry no bias of their own.
 */
template <typename T>
struct CellParams {
  ConvKernel<T> input;
  Tensor<T> hidden;

  CellParams() = default;
  CellParams(std::size_t in_channels, std::size_t hidden_channels, std::size_t k);

  std::size_t in_channels() const { return input.in_channels(); }
  std::size_t hidden_channels() const { return hidden.dim(1); }
  std::size_t kernel_size() const { return hidden.dim(2); }

  std::span<T> input_weights(Gate g) { return leading_slice(input.weights, block(g), hidden_channels()); }
  std::span<T> hidden_weights(Gate g) { return leading_slice(hidden, block(g), hidden_channels()); }
  std::span<T> bias(Gate g) { return leading_slice(input.bias, block(g), hidden_channels()); }
  std::span<const T> input_weights(Gate g) const {
    return leading_slice(input.weights, block(g), hidden_channels());
  }
  std::span<const T> hidden_weights(Gate g) const {
    return leading_slice(hidden, block(g), hidden_channels());
  }
  std::span<const T> bias(Gate g) const { return leading_slice(input.bias, block(g), hidden_channels()); }

  /// Throws ShapeError if the kernels disagree on k or channel counts.
  void validate() const;

  CellParams& operator+=(const CellParams& other);
  CellParams& operator*=(T s);
  void set_zero();

 private:
  std::size_t block(Gate g) const { return static_cast<std::size_t>(g) * hidden_channels(); }
};

template <typename T>
struct CellState {
  Tensor<T> h;
  Tensor<T> c;

  static CellState zeros(std::size_t channels, std::size_t height, std::size_t width) {
    return {Tensor<T>(Shape{channels, height, width}), Tensor<T>(Shape{channels, height, width})};
  }
};

/// Intermediates of one forward step, consumed by cell_backward.
template <typename T>
struct CellCache {
  Tensor<T> x;
  Tensor<T> h_prev;
  Tensor<T> c_prev;
  Tensor<T> gates;  // activated i, f, c~, o stacked as [4*C_hid,H,W]
  Tensor<T> c;
  Tensor<T> tanh_c;
};

template <typename T>
struct CellStep {
  CellState<T> next;
  CellCache<T> cache;
};

template <typename T>
CellStep<T> cell_forward(const Tensor<T>& x, const CellState<T>& prev, const CellParams<T>& params);

template <typename T>
struct CellBackward {
  Tensor<T> dx;  // empty when not requested
  Tensor<T> dh_prev;
  Tensor<T> dc_prev;
};

/// Gradients of <dh, h_t> + <dc, c_t>. Parameter gradients are added into
/// `dparams`, so the caller can accumulate across time steps.
template <typename T>
CellBackward<T> cell_backward(const Tensor<T>& dh, const Tensor<T>& dc, const CellCache<T>& cache,
                              const CellParams<T>& params, CellParams<T>& dparams,
                              bool want_dx = true);

/// Glorot-uniform weights, zero biases except the forget gate (1.0).
template <typename T>
CellParams<T> init_params(std::size_t in_channels, std::size_t hidden_channels, std::size_t k,
                          std::uint64_t seed);

}  // namespace clstm
