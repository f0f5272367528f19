// SPDX-License-Identifier: Apache-2.0
#include "clstm/cell.hpp"

#include <random>

namespace clstm {

template <typename T>
CellParams<T>::CellParams(std::size_t in_channels, std::size_t hidden_channels, std::size_t k)
    : input(kNumGates * hidden_channels, in_channels, k),
      hidden(Shape{kNumGates * hidden_channels, hidden_channels, k, k}) {
  validate();
}

template <typename T>
void CellParams<T>::validate() const {
  input.validate();
  const Shape& h = hidden.shape();
  if (h.size() != 4 || h[0] != kNumGates * h[1] || h[2] != h[3] ||
      h[2] != input.weights.dim(2) || input.out_channels() != h[0]) {
    throw ShapeError("inconsistent cell kernels: input " + shape_to_string(input.weights.shape()) +
                     ", hidden " + shape_to_string(h));
  }
}

template <typename T>
CellParams<T>& CellParams<T>::operator+=(const CellParams& other) {
  input.weights += other.input.weights;
  input.bias += other.input.bias;
  hidden += other.hidden;
  return *this;
}

template <typename T>
CellParams<T>& CellParams<T>::operator*=(T s) {
  input.weights *= s;
  input.bias *= s;
  hidden *= s;
  return *this;
}

template <typename T>
void CellParams<T>::set_zero() {
  input.weights.fill(T{0});
  input.bias.fill(T{0});
  hidden.fill(T{0});
}

template <typename T>
CellStep<T> cell_forward(const Tensor<T>& x, const CellState<T>& prev, const CellParams<T>& params) {
  const std::size_t ch = params.hidden_channels();
  if (x.rank() != 3 || prev.h.rank() != 3 || x.dim(1) != prev.h.dim(1) || x.dim(2) != prev.h.dim(2)) {
    throw ShapeError("cell input " + shape_to_string(x.shape()) + " and state " +
                     shape_to_string(prev.h.shape()) + " disagree spatially");
  }
  if (prev.h.dim(0) != ch) throw ShapeError("state channels do not match hidden channels");
  prev.h.require_same_shape(prev.c, "cell state");

  const std::size_t height = x.dim(1), width = x.dim(2);
  const std::size_t n = ch * height * width;

  // Pre-activations for all four gates at once.
  Tensor<T> gates = conv2d_same(x, params.input);
  conv2d_accumulate(prev.h, params.hidden, gates);

  T* g = gates.data();
  for (std::size_t i = 0; i < n; ++i) g[i] = sigmoid(g[i]);
  for (std::size_t i = n; i < 2 * n; ++i) g[i] = sigmoid(g[i]);
  for (std::size_t i = 2 * n; i < 3 * n; ++i) g[i] = std::tanh(g[i]);
  for (std::size_t i = 3 * n; i < 4 * n; ++i) g[i] = sigmoid(g[i]);

  const T* in_gate = g;
  const T* forget = g + n;
  const T* cand = g + 2 * n;
  const T* out_gate = g + 3 * n;

  CellStep<T> step;
  step.next = CellState<T>::zeros(ch, height, width);
  Tensor<T> tanh_c(Shape{ch, height, width});
  for (std::size_t i = 0; i < n; ++i) {
    const T c = forget[i] * prev.c[i] + in_gate[i] * cand[i];
    step.next.c[i] = c;
    tanh_c[i] = std::tanh(c);
    step.next.h[i] = out_gate[i] * tanh_c[i];
  }
  step.cache = CellCache<T>{x, prev.h, prev.c, std::move(gates), step.next.c, std::move(tanh_c)};
  return step;
}

template <typename T>
CellBackward<T> cell_backward(const Tensor<T>& dh, const Tensor<T>& dc, const CellCache<T>& cache,
                              const CellParams<T>& params, CellParams<T>& dparams, bool want_dx) {
  cache.c.require_same_shape(dh, "cell_backward dh");
  cache.c.require_same_shape(dc, "cell_backward dc");
  params.input.weights.require_same_shape(dparams.input.weights, "cell_backward dparams");

  const std::size_t n = cache.c.size();
  const std::size_t plane = n / cache.c.dim(0);
  const T* g = cache.gates.data();
  const T* in_gate = g;
  const T* forget = g + n;
  const T* cand = g + 2 * n;
  const T* out_gate = g + 3 * n;

  CellBackward<T> out;
  out.dc_prev = Tensor<T>::zeros_like(cache.c);
  Tensor<T> dpre = Tensor<T>::zeros_like(cache.gates);
  T* dp = dpre.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T tc = cache.tanh_c[i];
    const T dct = dc[i] + dh[i] * out_gate[i] * (T{1} - tc * tc);
    const T d_out = dh[i] * tc;
    const T d_in = dct * cand[i];
    const T d_forget = dct * cache.c_prev[i];
    const T d_cand = dct * in_gate[i];
    out.dc_prev[i] = dct * forget[i];
    dp[i] = d_in * in_gate[i] * (T{1} - in_gate[i]);
    dp[n + i] = d_forget * forget[i] * (T{1} - forget[i]);
    dp[2 * n + i] = d_cand * (T{1} - cand[i] * cand[i]);
    dp[3 * n + i] = d_out * out_gate[i] * (T{1} - out_gate[i]);
  }

  for (std::size_t co = 0; co < dpre.dim(0); ++co) {
    T sum{0};
    for (std::size_t i = 0; i < plane; ++i) sum += dp[co * plane + i];
    dparams.input.bias[co] += sum;
  }
  if (want_dx) out.dx = Tensor<T>::zeros_like(cache.x);
  conv2d_backward_accumulate(cache.x, params.input.weights, dpre, want_dx ? &out.dx : nullptr,
                             dparams.input.weights);
  out.dh_prev = Tensor<T>::zeros_like(cache.h_prev);
  conv2d_backward_accumulate(cache.h_prev, params.hidden, dpre, &out.dh_prev, dparams.hidden);
  return out;
}

template <typename T>
CellParams<T> init_params(std::size_t in_channels, std::size_t hidden_channels, std::size_t k,
                          std::uint64_t seed) {
  if (in_channels == 0 || hidden_channels == 0 || k % 2 == 0) {
    throw ShapeError("init_params needs positive channels and odd k");
  }
  CellParams<T> params(in_channels, hidden_channels, k);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::span<T> w, std::size_t fan_in) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + hidden_channels * k * k));
    std::uniform_real_distribution<double> dist(-s, s);
    for (auto& v : w) v = static_cast<T>(dist(rng));
  };
  for (auto gate : {Gate::kInput, Gate::kForget, Gate::kCandidate, Gate::kOutput}) {
    fill(params.input_weights(gate), in_channels * k * k);
  }
  for (auto gate : {Gate::kInput, Gate::kForget, Gate::kCandidate, Gate::kOutput}) {
    fill(params.hidden_weights(gate), hidden_channels * k * k);
  }
  for (auto& b : params.bias(Gate::kForget)) b = T{1};
  return params;
}

#define CLSTM_INSTANTIATE(T)                                                                      \
  template struct CellParams<T>;                                                                  \
  template CellStep<T> cell_forward(const Tensor<T>&, const CellState<T>&, const CellParams<T>&); \
  template CellBackward<T> cell_backward(const Tensor<T>&, const Tensor<T>&, const CellCache<T>&, \
                                         const CellParams<T>&, CellParams<T>&, bool);             \
  template CellParams<T> init_params(std::size_t, std::size_t, std::size_t, std::uint64_t);

CLSTM_INSTANTIATE(float)
CLSTM_INSTANTIATE(double)

}  // namespace clstm
