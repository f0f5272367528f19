// SPDX-License-Identifier: Apache-2.0
#include "clstm/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace clstm {

void Architecture::validate() const {
  if (hidden_channels.empty()) throw ShapeError("architecture needs at least one layer");
  for (auto c : hidden_channels) {
    if (c == 0) throw ShapeError("hidden channel counts must be positive");
  }
  if (kernel_size % 2 == 0) throw ShapeError("kernel size must be odd");
  if (height == 0 || width == 0 || window == 0) throw ShapeError("frame size and window must be positive");
  if (offset < 1 || offset > 3) throw std::invalid_argument("target offset must be 1, 2 or 3");
}

template <typename T>
Model<T>::Model(Architecture a) : arch(std::move(a)) {
  arch.validate();
  std::size_t in = 1;
  for (auto hid : arch.hidden_channels) {
    layers.emplace_back(in, hid, arch.kernel_size);
    in = hid;
  }
  head = ConvKernel<T>(1, in, arch.kernel_size);
}

template <typename T>
std::vector<Tensor<T>*> Model<T>::parameters() {
  std::vector<Tensor<T>*> out;
  for (auto& l : layers) {
    out.push_back(&l.input.weights);
    out.push_back(&l.hidden);
    out.push_back(&l.input.bias);
  }
  out.push_back(&head.weights);
  out.push_back(&head.bias);
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> Model<T>::parameters() const {
  auto mut = const_cast<Model*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
Model<T>& Model<T>::operator+=(const Model& other) {
  auto mine = parameters();
  auto theirs = other.parameters();
  if (mine.size() != theirs.size()) throw ShapeError("model layer count mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) *mine[i] += *theirs[i];
  return *this;
}

template <typename T>
Model<T>& Model<T>::operator*=(T s) {
  for (auto* p : parameters()) *p *= s;
  return *this;
}

template <typename T>
void Model<T>::set_zero() {
  for (auto* p : parameters()) p->fill(T{0});
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out(arch);
  auto src = parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
  return out;
}

template <typename T>
Model<T> init_model(const Architecture& arch, std::uint64_t seed) {
  Model<T> model(arch);
  std::size_t in = 1;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    model.layers[l] = init_params<T>(in, arch.hidden_channels[l], arch.kernel_size,
                                     seed * 1000003ULL + l);
    in = arch.hidden_channels[l];
  }
  std::mt19937_64 rng(seed * 1000003ULL + arch.num_layers());
  const std::size_t k2 = arch.kernel_size * arch.kernel_size;
  const double s = std::sqrt(6.0 / static_cast<double>(in * k2 + k2));
  std::uniform_real_distribution<double> dist(-s, s);
  for (auto& w : model.head.weights.values()) w = static_cast<T>(dist(rng));
  return model;
}

template <typename T>
SequenceForward<T> forward_sequence(const std::vector<Tensor<T>>& frames, const Model<T>& model) {
  const Architecture& arch = model.arch;
  if (frames.size() != arch.window) {
    throw ShapeError("expected " + std::to_string(arch.window) + " input frames, got " +
                     std::to_string(frames.size()));
  }
  if (model.layers.size() != arch.num_layers()) throw ShapeError("model layers do not match arch");
  const Shape frame_shape{1, arch.height, arch.width};
  for (const auto& f : frames) {
    if (f.shape() != frame_shape) {
      throw ShapeError("input frame " + shape_to_string(f.shape()) + " does not match model " +
                       shape_to_string(frame_shape));
    }
  }

  std::vector<CellState<T>> states;
  for (auto hid : arch.hidden_channels) {
    states.push_back(CellState<T>::zeros(hid, arch.height, arch.width));
  }

  SequenceForward<T> out;
  out.caches.resize(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Tensor<T>* input = &frames[t];
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      auto step = cell_forward(*input, states[l], model.layers[l]);
      states[l] = std::move(step.next);
      out.caches[t].push_back(std::move(step.cache));
      input = &states[l].h;
    }
  }
  out.prediction = conv2d_same(states.back().h, model.head);
  return out;
}

template <typename T>
Model<T> backward_sequence(const SequenceForward<T>& forward, const Tensor<T>& grad_prediction,
                           const Model<T>& model) {
  const Architecture& arch = model.arch;
  const std::size_t layers = model.layers.size();
  if (forward.caches.size() != arch.window ||
      std::any_of(forward.caches.begin(), forward.caches.end(),
                  [&](const auto& c) { return c.size() != layers; })) {
    throw ShapeError("forward caches do not match the model architecture");
  }
  forward.prediction.require_same_shape(grad_prediction, "grad_prediction");

  Model<T> grads(arch);
  const auto& top_cache = forward.caches.back().back();
  // The head consumes h_T of the top layer: h = o * tanh(c).
  Tensor<T> h_last = Tensor<T>::zeros_like(top_cache.c);
  {
    const std::size_t n = h_last.size();
    const T* o = top_cache.gates.data() + 3 * n;
    for (std::size_t i = 0; i < n; ++i) h_last[i] = o[i] * top_cache.tanh_c[i];
  }
  Tensor<T> dh_head = Tensor<T>::zeros_like(h_last);
  conv2d_backward_accumulate(h_last, model.head.weights, grad_prediction, &dh_head,
                             grads.head.weights);
  for (std::size_t i = 0; i < grad_prediction.size(); ++i) grads.head.bias[0] += grad_prediction[i];

  std::vector<Tensor<T>> dh_next(layers), dc_next(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    dh_next[l] = Tensor<T>(Shape{arch.hidden_channels[l], arch.height, arch.width});
    dc_next[l] = dh_next[l];
  }
  dh_next.back() += dh_head;

  for (std::size_t t = arch.window; t-- > 0;) {
    Tensor<T> from_above;
    for (std::size_t l = layers; l-- > 0;) {
      Tensor<T> dh = dh_next[l];
      if (!from_above.empty()) dh += from_above;
      auto back = cell_backward(dh, dc_next[l], forward.caches[t][l], model.layers[l],
                                grads.layers[l], l > 0);
      dh_next[l] = std::move(back.dh_prev);
      dc_next[l] = std::move(back.dc_prev);
      from_above = std::move(back.dx);
    }
  }
  return grads;
}

template <typename T>
std::vector<Tensor<T>> to_sequence(std::span<const Frame> frames) {
  std::vector<Tensor<T>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.template cast<T>());
  return out;
}

template <typename T>
Frame predict(std::span<const Frame> window, const Model<T>& model) {
  const auto fwd = forward_sequence(to_sequence<T>(window), model);
  Frame out(fwd.prediction.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::clamp(fwd.prediction[i], T{0}, T{1}));
  }
  return out;
}

#define CLSTM_INSTANTIATE(T)                                                                       \
  template struct Model<T>;                                                                        \
  template Model<T> init_model(const Architecture&, std::uint64_t);                                \
  template SequenceForward<T> forward_sequence(const std::vector<Tensor<T>>&, const Model<T>&);    \
  template Model<T> backward_sequence(const SequenceForward<T>&, const Tensor<T>&, const Model<T>&); \
  template std::vector<Tensor<T>> to_sequence(std::span<const Frame>);                             \
  template Frame predict(std::span<const Frame>, const Model<T>&);

CLSTM_INSTANTIATE(float)
CLSTM_INSTANTIATE(double)
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace clstm
