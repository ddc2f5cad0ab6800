#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "boltzlens/layers.hpp"
#include "boltzlens/rng.hpp"
#include "boltzlens/tensor.hpp"

namespace bl {

enum class LayerKind : std::uint8_t { Conv, Relu, MaxPool, Flatten, Fc, Softmax };

struct LayerSpec {
  LayerKind kind;
  int kernel = 0;        // Conv
  int out_channels = 0;  // Conv
  int out = 0;           // Fc

  static LayerSpec conv(int kernel, int out_channels) {
    return {LayerKind::Conv, kernel, out_channels, 0};
  }
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec maxpool() { return {LayerKind::MaxPool}; }
  static LayerSpec flatten() { return {LayerKind::Flatten}; }
  static LayerSpec fc(int out) { return {LayerKind::Fc, 0, 0, out}; }
  static LayerSpec softmax() { return {LayerKind::Softmax}; }
};

// Declarative layer list. The three presets reproduce the paper's CNN1/2/3
// architectures, which differ only in the first conv layer's channel count.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::vector<int> input_shape{32, 32, 1};

  static NetworkSpec preset(const std::string& name) {
    int c1 = 0;
    if (name == "cnn1")
      c1 = 4;
    else if (name == "cnn2")
      c1 = 12;
    else if (name == "cnn3")
      c1 = 20;
    else
      throw DimensionError("unknown preset '" + name + "' (want cnn1|cnn2|cnn3)");
    NetworkSpec s;
    s.layers = {LayerSpec::conv(3, c1), LayerSpec::relu(),  LayerSpec::maxpool(),
                LayerSpec::conv(5, 20), LayerSpec::relu(),  LayerSpec::maxpool(),
                LayerSpec::flatten(),   LayerSpec::fc(20),  LayerSpec::fc(10),
                LayerSpec::softmax()};
    return s;
  }

  // Output shape after each descriptor. Throws if the chain is inconsistent.
  std::vector<std::vector<int>> shape_chain() const {
    std::vector<std::vector<int>> chain;
    std::vector<int> cur = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      switch (l.kind) {
        case LayerKind::Conv: {
          if (cur.size() != 3)
            throw DimensionError("layer " + std::to_string(i) +
                                 ": conv needs [H,W,C] input, got " + shape_string(cur));
          const int oh = cur[0] - l.kernel + 1, ow = cur[1] - l.kernel + 1;
          if (oh < 1 || ow < 1)
            throw DimensionError("layer " + std::to_string(i) +
                                 ": kernel does not fit input " + shape_string(cur));
          cur = {oh, ow, l.out_channels};
          break;
        }
        case LayerKind::Relu:
          break;
        case LayerKind::MaxPool: {
          if (cur.size() != 3)
            throw DimensionError("layer " + std::to_string(i) +
                                 ": maxpool needs [H,W,C] input");
          const int oh = cur[0] / 2, ow = cur[1] / 2;
          if (oh < 1 || ow < 1)
            throw DimensionError("layer " + std::to_string(i) +
                                 ": maxpool input too small " + shape_string(cur));
          cur = {oh, ow, cur[2]};
          break;
        }
        case LayerKind::Flatten: {
          int n = 1;
          for (int d : cur) n *= d;
          cur = {n};
          break;
        }
        case LayerKind::Fc: {
          int n = 1;
          for (int d : cur) n *= d;
          cur = {l.out};
          (void)n;
          break;
        }
        case LayerKind::Softmax:
          break;
      }
      chain.push_back(cur);
    }
    return chain;
  }

  int num_classes() const {
    auto chain = shape_chain();
    return chain.empty() ? 0 : chain.back().back();
  }
};

// ---------------------------------------------------------------------------
// Network, trace, gradients
// ---------------------------------------------------------------------------

template <class T = double>
struct Network {
  NetworkSpec spec;
  std::vector<ConvLayerParams<T>> conv;  // in descriptor order
  std::vector<FcLayerParams<T>> fc;      // in descriptor order
};

template <class To, class From>
Network<To> network_cast(const Network<From>& net) {
  Network<To> out;
  out.spec = net.spec;
  for (const auto& c : net.conv)
    out.conv.push_back({tensor_cast<To>(c.filters), tensor_cast<To>(c.bias)});
  for (const auto& f : net.fc)
    out.fc.push_back({tensor_cast<To>(f.weights), tensor_cast<To>(f.bias)});
  return out;
}

// One trace entry per conv, pool, and fc layer. ReLU folds into the entry of
// the layer it activates; softmax folds into the final fc entry.
template <class T = double>
struct TraceEntry {
  int layer_index = 0;  // descriptor index in NetworkSpec
  LayerKind kind = LayerKind::Conv;
  Tensor<T> pre;   // linear output (conv/fc); pool input for MaxPool
  Tensor<T> act;   // after activation / pooling
  std::vector<int> argmax;  // MaxPool only
  std::vector<T> cols;      // Conv only: im2col patch matrix
  bool relu_applied = false;
  bool softmax_applied = false;
};

template <class T = double>
struct LayerTrace {
  std::vector<TraceEntry<T>> entries;
};

template <class T = double>
struct Gradients {
  std::vector<ConvLayerParams<T>> conv;  // same shapes as Network::conv
  std::vector<FcLayerParams<T>> fc;
};

// Glorot-style uniform init, biases zero. Deterministic in the seed.
template <class T = double>
Network<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.shape_chain();  // validate
  Network<T> net;
  net.spec = spec;
  CounterRng rng(seed);
  std::vector<int> cur = spec.input_shape;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        const int inc = cur[2];
        const int fan_in = l.kernel * l.kernel * inc;
        const int fan_out = l.kernel * l.kernel * l.out_channels;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        ConvLayerParams<T> p{Tensor<T>({l.kernel, l.kernel, inc, l.out_channels}),
                             Tensor<T>({l.out_channels})};
        for (T& w : p.filters.data) w = static_cast<T>(rng.uniform(-limit, limit));
        net.conv.push_back(std::move(p));
        cur = {cur[0] - l.kernel + 1, cur[1] - l.kernel + 1, l.out_channels};
        break;
      }
      case LayerKind::Fc: {
        int in = 1;
        for (int d : cur) in *= d;
        const double limit = std::sqrt(6.0 / (in + l.out));
        FcLayerParams<T> p{Tensor<T>({in, l.out}), Tensor<T>({l.out})};
        for (T& w : p.weights.data) w = static_cast<T>(rng.uniform(-limit, limit));
        net.fc.push_back(std::move(p));
        cur = {l.out};
        break;
      }
      case LayerKind::MaxPool:
        cur = {cur[0] / 2, cur[1] / 2, cur[2]};
        break;
      case LayerKind::Flatten: {
        int n = 1;
        for (int d : cur) n *= d;
        cur = {n};
        break;
      }
      case LayerKind::Relu:
      case LayerKind::Softmax:
        break;
    }
  }
  return net;
}

template <class T>
Gradients<T> zero_gradients(const Network<T>& net) {
  Gradients<T> g;
  for (const auto& c : net.conv)
    g.conv.push_back({Tensor<T>(c.filters.shape), Tensor<T>(c.bias.shape)});
  for (const auto& f : net.fc)
    g.fc.push_back({Tensor<T>(f.weights.shape), Tensor<T>(f.bias.shape)});
  return g;
}

template <class T>
void accumulate(Gradients<T>& into, const Gradients<T>& g) {
  for (std::size_t i = 0; i < into.conv.size(); ++i) {
    for (std::size_t j = 0; j < into.conv[i].filters.numel(); ++j)
      into.conv[i].filters[j] += g.conv[i].filters[j];
    for (std::size_t j = 0; j < into.conv[i].bias.numel(); ++j)
      into.conv[i].bias[j] += g.conv[i].bias[j];
  }
  for (std::size_t i = 0; i < into.fc.size(); ++i) {
    for (std::size_t j = 0; j < into.fc[i].weights.numel(); ++j)
      into.fc[i].weights[j] += g.fc[i].weights[j];
    for (std::size_t j = 0; j < into.fc[i].bias.numel(); ++j)
      into.fc[i].bias[j] += g.fc[i].bias[j];
  }
}

template <class T>
void scale(Gradients<T>& g, T s) {
  for (auto& c : g.conv) {
    for (T& v : c.filters.data) v *= s;
    for (T& v : c.bias.data) v *= s;
  }
  for (auto& f : g.fc) {
    for (T& v : f.weights.data) v *= s;
    for (T& v : f.bias.data) v *= s;
  }
}

// ---------------------------------------------------------------------------
// Forward / backward / update
// ---------------------------------------------------------------------------

template <class T>
std::pair<Tensor<T>, LayerTrace<T>> forward_with_trace(const Network<T>& net,
                                                       const Tensor<T>& x) {
  require_shape(x.shape, net.spec.input_shape, "forward");
  LayerTrace<T> trace;
  Tensor<T> cur = x;
  std::size_t ci = 0, fi = 0;
  for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
    const LayerSpec& l = net.spec.layers[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        TraceEntry<T> e;
        e.layer_index = static_cast<int>(i);
        e.kind = LayerKind::Conv;
        e.pre = conv2d_im2col(cur, net.conv[ci++], &e.cols);
        e.act = e.pre;
        trace.entries.push_back(std::move(e));
        cur = trace.entries.back().act;
        break;
      }
      case LayerKind::Relu: {
        TraceEntry<T>& e = trace.entries.back();
        e.act = relu(e.pre);
        e.relu_applied = true;
        cur = e.act;
        break;
      }
      case LayerKind::MaxPool: {
        TraceEntry<T> e;
        e.layer_index = static_cast<int>(i);
        e.kind = LayerKind::MaxPool;
        e.pre = cur;
        e.act = maxpool_forward(cur, e.argmax);
        trace.entries.push_back(std::move(e));
        cur = trace.entries.back().act;
        break;
      }
      case LayerKind::Flatten: {
        cur.shape = {static_cast<int>(cur.numel())};
        break;
      }
      case LayerKind::Fc: {
        TraceEntry<T> e;
        e.layer_index = static_cast<int>(i);
        e.kind = LayerKind::Fc;
        e.pre = fc_forward(cur, net.fc[fi++]);
        e.act = e.pre;
        trace.entries.push_back(std::move(e));
        cur = trace.entries.back().act;
        break;
      }
      case LayerKind::Softmax: {
        TraceEntry<T>& e = trace.entries.back();
        e.act = softmax(e.pre);
        e.softmax_applied = true;
        cur = e.act;
        break;
      }
    }
  }
  return {cur, std::move(trace)};
}

// Backprop for the softmax + cross-entropy objective. The trace must come
// from forward_with_trace on the same network. MaxPool routes gradient to the
// stored argmax; ReLU gates by preActivation > 0.
template <class T>
Gradients<T> backward(const Network<T>& net, const LayerTrace<T>& trace, int label) {
  Gradients<T> grads = zero_gradients(net);
  if (trace.entries.empty() || !trace.entries.back().softmax_applied)
    throw DimensionError("backward: trace does not end in a softmax output layer");
  const TraceEntry<T>& out_entry = trace.entries.back();
  const int classes = static_cast<int>(out_entry.act.numel());
  if (label < 0 || label >= classes)
    throw DimensionError("backward: label " + std::to_string(label) +
                         " out of range for " + std::to_string(classes) + " classes");

  // d loss / d logits for softmax + cross-entropy
  Tensor<T> grad = out_entry.act;
  grad[label] -= T(1);

  std::size_t ci = net.conv.size(), fi = net.fc.size();
  for (std::size_t idx = trace.entries.size(); idx-- > 0;) {
    const TraceEntry<T>& e = trace.entries[idx];
    // Input to this layer: previous entry's activation, or the network input
    // (whose gradient we do not need).
    const Tensor<T>* input = idx > 0 ? &trace.entries[idx - 1].act : nullptr;
    switch (e.kind) {
      case LayerKind::Fc: {
        const FcLayerParams<T>& p = net.fc[--fi];
        FcLayerParams<T>& g = grads.fc[fi];
        if (e.relu_applied)
          for (std::size_t j = 0; j < grad.numel(); ++j)
            if (e.pre[j] <= T(0)) grad[j] = T(0);
        if (static_cast<int>(grad.numel()) != p.out())
          throw DimensionError("backward: stale trace at fc layer " +
                               std::to_string(e.layer_index));
        if (!input) throw DimensionError("backward: fc layer cannot be first");
        if (static_cast<int>(input->numel()) != p.in())
          throw DimensionError("backward: stale trace input at fc layer " +
                               std::to_string(e.layer_index));
        for (int o = 0; o < p.out(); ++o) g.bias[o] += grad[o];
        for (int i2 = 0; i2 < p.in(); ++i2) {
          const T xv = input->data[i2];
          T* grow = &g.weights.data[static_cast<std::size_t>(i2) * p.out()];
          for (int o = 0; o < p.out(); ++o) grow[o] += xv * grad[o];
        }
        Tensor<T> dx({p.in()});
        for (int i2 = 0; i2 < p.in(); ++i2) {
          const T* wrow = &p.weights.data[static_cast<std::size_t>(i2) * p.out()];
          T acc = T(0);
          for (int o = 0; o < p.out(); ++o) acc += wrow[o] * grad[o];
          dx[i2] = acc;
        }
        if (input) dx.shape = input->shape;
        grad = std::move(dx);
        break;
      }
      case LayerKind::MaxPool: {
        Tensor<T> dx(e.pre.shape);
        if (grad.numel() != e.argmax.size())
          throw DimensionError("backward: stale trace at maxpool layer " +
                               std::to_string(e.layer_index));
        for (std::size_t j = 0; j < grad.numel(); ++j) dx[e.argmax[j]] += grad[j];
        grad = std::move(dx);
        break;
      }
      case LayerKind::Conv: {
        const ConvLayerParams<T>& p = net.conv[--ci];
        ConvLayerParams<T>& g = grads.conv[ci];
        if (grad.numel() != e.pre.numel())
          throw DimensionError("backward: stale trace at conv layer " +
                               std::to_string(e.layer_index));
        if (e.relu_applied)
          for (std::size_t j = 0; j < grad.numel(); ++j)
            if (e.pre[j] <= T(0)) grad[j] = T(0);
        const int oh = e.pre.dim(0), ow = e.pre.dim(1), outc = p.out_channels();
        const int patch = p.kh() * p.kw() * p.in_channels();
        const int pix = oh * ow;
        // dW = cols^T * dOut
        matmul_at_b_accum(e.cols.data(), grad.data.data(), g.filters.data.data(), pix,
                          patch, outc);
        for (int pp = 0; pp < pix; ++pp) {
          const T* grow = grad.data.data() + static_cast<std::size_t>(pp) * outc;
          for (int n = 0; n < outc; ++n) g.bias[n] += grow[n];
        }
        if (idx > 0) {
          // dcols = dOut * W^T, then scatter back onto the input grid.
          std::vector<T> dcols(static_cast<std::size_t>(pix) * patch);
          matmul_a_bt(grad.data.data(), p.filters.data.data(), dcols.data(), pix, patch,
                      outc);
          const Tensor<T>& in = *input;
          grad = col2im(dcols, in.dim(0), in.dim(1), in.dim(2), p.kh(), p.kw());
        } else {
          grad = Tensor<T>();  // input gradient not needed
        }
        break;
      }
      default:
        throw DimensionError("backward: unexpected trace entry kind");
    }
  }
  return grads;
}

// In-place SGD update: p <- p - lr * grad(p).
template <class T>
void sgd_step(Network<T>& net, const Gradients<T>& grads, T lr) {
  if (!(lr > T(0))) throw DimensionError("sgd_step: learning rate must be positive");
  for (std::size_t i = 0; i < net.conv.size(); ++i) {
    for (std::size_t j = 0; j < net.conv[i].filters.numel(); ++j)
      net.conv[i].filters[j] -= lr * grads.conv[i].filters[j];
    for (std::size_t j = 0; j < net.conv[i].bias.numel(); ++j)
      net.conv[i].bias[j] -= lr * grads.conv[i].bias[j];
  }
  for (std::size_t i = 0; i < net.fc.size(); ++i) {
    for (std::size_t j = 0; j < net.fc[i].weights.numel(); ++j)
      net.fc[i].weights[j] -= lr * grads.fc[i].weights[j];
    for (std::size_t j = 0; j < net.fc[i].bias.numel(); ++j)
      net.fc[i].bias[j] -= lr * grads.fc[i].bias[j];
  }
}

}  // namespace bl
