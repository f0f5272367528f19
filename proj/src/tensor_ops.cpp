// SPDX-License-Identifier: Apache-2.0
#include "clstm/tensor_ops.hpp"

#include <Eigen/Core>
#include <sstream>

namespace clstm {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

void check_weights(const Shape& w) {
  if (w.size() != 4 || w[2] != w[3] || w[2] % 2 == 0) {
    throw ShapeError("kernel weights must be [C_out,C_in,k,k] with odd k, got " + shape_to_string(w));
  }
}

void check_input(const Shape& in, const Shape& w) {
  if (in.size() != 3) throw ShapeError("conv input must be [C,H,W], got " + shape_to_string(in));
  if (in[0] != w[1]) {
    throw ShapeError("conv input has " + std::to_string(in[0]) + " channels but kernel expects " +
                     std::to_string(w[1]));
  }
}

// cols is [C_in*k*k, H*W]; row (c, ky, kx) holds input[c, y+ky-p, x+kx-p].
// Per-thread scratch; large buffers would otherwise be mapped and unmapped
// on every call.
template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[2];
  return buffers[slot];
}

template <typename T>
const std::vector<T>& im2col(const Tensor<T>& input, std::size_t k) {
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const long pad = static_cast<long>(k / 2);
  const std::size_t plane = height * width;
  std::vector<T>& cols = scratch<T>(0);
  cols.assign(channels * k * k * plane, T{0});
  for (std::size_t c = 0; c < channels; ++c) {
    const T* src = input.data() + c * plane;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* dst = cols.data() + ((c * k + ky) * k + kx) * plane;
        const long dy = static_cast<long>(ky) - pad;
        const long dx = static_cast<long>(kx) - pad;
        for (std::size_t y = 0; y < height; ++y) {
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(height)) continue;
          const long x_begin = std::max(0L, -dx);
          const long x_end = std::min(static_cast<long>(width), static_cast<long>(width) - dx);
          for (long x = x_begin; x < x_end; ++x) {
            dst[y * width + x] = src[sy * static_cast<long>(width) + x + dx];
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
void col2im_accumulate(const std::vector<T>& cols, std::size_t k, Tensor<T>& grad_input) {
  const std::size_t channels = grad_input.dim(0), height = grad_input.dim(1),
                    width = grad_input.dim(2);
  const long pad = static_cast<long>(k / 2);
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    T* dst = grad_input.data() + c * plane;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* src = cols.data() + ((c * k + ky) * k + kx) * plane;
        const long dy = static_cast<long>(ky) - pad;
        const long dx = static_cast<long>(kx) - pad;
        for (std::size_t y = 0; y < height; ++y) {
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(height)) continue;
          const long x_begin = std::max(0L, -dx);
          const long x_end = std::min(static_cast<long>(width), static_cast<long>(width) - dx);
          for (long x = x_begin; x < x_end; ++x) {
            dst[sy * static_cast<long>(width) + x + dx] += src[y * width + x];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
ConvKernel<T>::ConvKernel(std::size_t c_out, std::size_t c_in, std::size_t k)
    : weights(Shape{c_out, c_in, k, k}), bias(Shape{c_out}) {
  validate();
}

template <typename T>
ConvKernel<T>::ConvKernel(Tensor<T> w, Tensor<T> b) : weights(std::move(w)), bias(std::move(b)) {
  validate();
}

template <typename T>
void ConvKernel<T>::validate() const {
  check_weights(weights.shape());
  if (bias.shape() != Shape{weights.dim(0)}) {
    throw ShapeError("bias " + shape_to_string(bias.shape()) + " does not match kernel " +
                     shape_to_string(weights.shape()));
  }
}

template <typename T>
void conv2d_accumulate(const Tensor<T>& input, const Tensor<T>& weights, Tensor<T>& out) {
  check_weights(weights.shape());
  check_input(input.shape(), weights.shape());
  const std::size_t c_out = weights.dim(0), k = weights.dim(2);
  const std::size_t plane = input.dim(1) * input.dim(2);
  if (out.shape() != Shape{c_out, input.dim(1), input.dim(2)}) {
    throw ShapeError("conv output buffer " + shape_to_string(out.shape()) + " does not match");
  }
  const std::size_t patch = input.dim(0) * k * k;
  const std::vector<T>& cols = im2col(input, k);
  ConstMatMap<T> w(weights.data(), c_out, patch);
  ConstMatMap<T> c(cols.data(), patch, plane);
  MatMap<T> o(out.data(), c_out, plane);
  o.noalias() += w * c;
}

template <typename T>
void conv2d_backward_accumulate(const Tensor<T>& input, const Tensor<T>& weights,
                                const Tensor<T>& grad_out, Tensor<T>* grad_input,
                                Tensor<T>& grad_weights) {
  check_weights(weights.shape());
  check_input(input.shape(), weights.shape());
  const std::size_t c_out = weights.dim(0), k = weights.dim(2);
  const std::size_t plane = input.dim(1) * input.dim(2);
  if (grad_out.shape() != Shape{c_out, input.dim(1), input.dim(2)}) {
    throw ShapeError("grad_out " + shape_to_string(grad_out.shape()) +
                     " does not match conv output shape");
  }
  weights.require_same_shape(grad_weights, "grad_weights");
  const std::size_t patch = input.dim(0) * k * k;
  const std::vector<T>& cols = im2col(input, k);
  ConstMatMap<T> g(grad_out.data(), c_out, plane);
  ConstMatMap<T> c(cols.data(), patch, plane);
  MatMap<T> gw(grad_weights.data(), c_out, patch);
  gw.noalias() += g * c.transpose();
  if (grad_input != nullptr) {
    input.require_same_shape(*grad_input, "grad_input");
    std::vector<T>& grad_cols = scratch<T>(1);
    grad_cols.resize(patch * plane);
    ConstMatMap<T> w(weights.data(), c_out, patch);
    MatMap<T> gc(grad_cols.data(), patch, plane);
    gc.noalias() = w.transpose() * g;
    col2im_accumulate(grad_cols, k, *grad_input);
  }
}

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const ConvKernel<T>& kernel) {
  kernel.validate();
  check_input(input.shape(), kernel.weights.shape());
  const std::size_t plane = input.dim(1) * input.dim(2);
  Tensor<T> out(Shape{kernel.out_channels(), input.dim(1), input.dim(2)});
  for (std::size_t co = 0; co < kernel.out_channels(); ++co) {
    std::fill_n(out.data() + co * plane, plane, kernel.bias[co]);
  }
  conv2d_accumulate(input, kernel.weights, out);
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvKernel<T>& kernel,
                             const Tensor<T>& grad_out) {
  kernel.validate();
  ConvGrads<T> grads{Tensor<T>::zeros_like(input), Tensor<T>::zeros_like(kernel.weights),
                     Tensor<T>::zeros_like(kernel.bias)};
  conv2d_backward_accumulate(input, kernel.weights, grad_out, &grads.input, grads.weights);
  const std::size_t plane = input.dim(1) * input.dim(2);
  for (std::size_t co = 0; co < kernel.out_channels(); ++co) {
    T sum{0};
    for (std::size_t i = 0; i < plane; ++i) sum += grad_out[co * plane + i];
    grads.bias[co] = sum;
  }
  return grads;
}

template <typename T>
Tensor<T> activation(Activation kind, const Tensor<T>& x) {
  Tensor<T> y = x;
  if (kind == Activation::kSigmoid) {
    for (auto& v : y.values()) v = sigmoid(v);
  } else {
    for (auto& v : y.values()) v = std::tanh(v);
  }
  return y;
}

template <typename T>
Tensor<T> activation_grad(Activation kind, const Tensor<T>& y, const Tensor<T>& grad_out) {
  y.require_same_shape(grad_out, "activation_grad");
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const T out = y[i];
    g[i] *= kind == Activation::kSigmoid ? out * (T{1} - out) : T{1} - out * out;
  }
  return g;
}

#define CLSTM_INSTANTIATE(T)                                                                     \
  template struct ConvKernel<T>;                                                                 \
  template Tensor<T> conv2d_same(const Tensor<T>&, const ConvKernel<T>&);                        \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const ConvKernel<T>&, const Tensor<T>&); \
  template void conv2d_accumulate(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);               \
  template void conv2d_backward_accumulate(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                           Tensor<T>*, Tensor<T>&);                              \
  template Tensor<T> activation(Activation, const Tensor<T>&);                                   \
  template Tensor<T> activation_grad(Activation, const Tensor<T>&, const Tensor<T>&);

CLSTM_INSTANTIATE(float)
CLSTM_INSTANTIATE(double)

}  // namespace clstm
