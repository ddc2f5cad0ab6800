#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "boltzlens/tensor.hpp"

namespace bl {

// ---------------------------------------------------------------------------
// Small dense matmul kernels. Inner loops run over the contiguous trailing
// axis so the compiler can vectorize them.
// ---------------------------------------------------------------------------

// C[MxN] = A[MxK] * B[KxN]
template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
  std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[KxN] += A^T * B, with A[MxK], B[MxN]
template <class T>
void matmul_at_b_accum(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    const T* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[MxK] = A * B^T, with A[MxN], B[KxN]
template <class T>
void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * n;
    T* crow = c + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T* brow = b + static_cast<std::size_t>(p) * n;
      T acc = T(0);
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] = acc;
    }
  }
}

// ---------------------------------------------------------------------------
// Layer parameter bundles
// ---------------------------------------------------------------------------

// Valid cross-correlation, stride 1. filters laid out [kH,kW,inC,outC], so
// flattening the first three axes yields the [kH*kW*inC, outC] matrix used by
// the im2col path.
template <class T = double>
struct ConvLayerParams {
  Tensor<T> filters;  // [kH,kW,inC,outC]
  Tensor<T> bias;     // [outC]

  int kh() const { return filters.dim(0); }
  int kw() const { return filters.dim(1); }
  int in_channels() const { return filters.dim(2); }
  int out_channels() const { return filters.dim(3); }
};

template <class T = double>
struct FcLayerParams {
  Tensor<T> weights;  // [in,out]
  Tensor<T> bias;     // [out]

  int in() const { return weights.dim(0); }
  int out() const { return weights.dim(1); }
};

template <class T>
void check_conv_input(const Tensor<T>& input, const ConvLayerParams<T>& p) {
  if (input.shape.size() != 3)
    throw DimensionError("conv2d: input must be [H,W,C], got " +
                         shape_string(input.shape));
  if (input.dim(2) != p.in_channels())
    throw DimensionError("conv2d: channel axis mismatch, input has " +
                         std::to_string(input.dim(2)) + " channels, filters expect " +
                         std::to_string(p.in_channels()));
  if (input.dim(0) < p.kh())
    throw DimensionError("conv2d: height axis too small, " +
                         std::to_string(input.dim(0)) + " < kernel " +
                         std::to_string(p.kh()));
  if (input.dim(1) < p.kw())
    throw DimensionError("conv2d: width axis too small, " +
                         std::to_string(input.dim(1)) + " < kernel " +
                         std::to_string(p.kw()));
}

// ---------------------------------------------------------------------------
// Forward ops
// ---------------------------------------------------------------------------

// Direct sliding-window cross-correlation. Reference path; the network
// itself runs the im2col path below.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayerParams<T>& p) {
  check_conv_input(input, p);
  const int oh = input.dim(0) - p.kh() + 1;
  const int ow = input.dim(1) - p.kw() + 1;
  const int inc = p.in_channels(), outc = p.out_channels();
  Tensor<T> out({oh, ow, outc});
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      T* op = &out.at3(y, x, 0);
      for (int n = 0; n < outc; ++n) op[n] = p.bias[n];
      for (int ky = 0; ky < p.kh(); ++ky) {
        for (int kx = 0; kx < p.kw(); ++kx) {
          const T* ip = &input.at3(y + ky, x + kx, 0);
          const T* fp = &p.filters.data[((static_cast<std::size_t>(ky) * p.kw() + kx) *
                                         inc) * outc];
          for (int q = 0; q < inc; ++q) {
            const T iv = ip[q];
            const T* frow = fp + static_cast<std::size_t>(q) * outc;
            for (int n = 0; n < outc; ++n) op[n] += iv * frow[n];
          }
        }
      }
    }
  }
  return out;
}

// Unrolls valid patches into a [outH*outW, kH*kW*inC] matrix.
template <class T>
std::vector<T> im2col(const Tensor<T>& input, int kh, int kw) {
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const int oh = h - kh + 1, ow = w - kw + 1;
  const std::size_t patch = static_cast<std::size_t>(kh) * kw * c;
  std::vector<T> cols(static_cast<std::size_t>(oh) * ow * patch);
  std::size_t row = 0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      T* dst = cols.data() + row * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const T* src = &input.at3(y + ky, x, 0);
        std::memcpy(dst, src, sizeof(T) * static_cast<std::size_t>(kw) * c);
        dst += static_cast<std::size_t>(kw) * c;
      }
      ++row;
    }
  }
  return cols;
}

// Scatter-add of column gradients back onto the input grid.
template <class T>
Tensor<T> col2im(const std::vector<T>& dcols, int h, int w, int c, int kh, int kw) {
  const int oh = h - kh + 1, ow = w - kw + 1;
  const std::size_t patch = static_cast<std::size_t>(kh) * kw * c;
  Tensor<T> dinput({h, w, c});
  std::size_t row = 0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const T* src = dcols.data() + row * patch;
      for (int ky = 0; ky < kh; ++ky) {
        T* dst = &dinput.at3(y + ky, x, 0);
        const int span = kw * c;
        for (int i = 0; i < span; ++i) dst[i] += src[i];
        src += span;
      }
      ++row;
    }
  }
  return dinput;
}

// Convolution as a patch-matrix multiplication. Identical result to
// conv2d_forward. When `cols_out` is non-null the patch matrix is kept for
// the backward pass.
template <class T>
Tensor<T> conv2d_im2col(const Tensor<T>& input, const ConvLayerParams<T>& p,
                        std::vector<T>* cols_out = nullptr) {
  check_conv_input(input, p);
  const int oh = input.dim(0) - p.kh() + 1;
  const int ow = input.dim(1) - p.kw() + 1;
  const int outc = p.out_channels();
  const int patch = p.kh() * p.kw() * p.in_channels();
  std::vector<T> cols = im2col(input, p.kh(), p.kw());
  Tensor<T> out({oh, ow, outc});
  matmul(cols.data(), p.filters.data.data(), out.data.data(), oh * ow, patch, outc);
  for (std::size_t pix = 0; pix < static_cast<std::size_t>(oh) * ow; ++pix) {
    T* op = out.data.data() + pix * outc;
    for (int n = 0; n < outc; ++n) op[n] += p.bias[n];
  }
  if (cols_out) *cols_out = std::move(cols);
  return out;
}

// 2x2 max pooling, floor semantics on odd dims (the trailing row/column is
// dropped). Argmax indices are flat input offsets, kept for the backward pass.
template <class T>
Tensor<T> maxpool_forward(const Tensor<T>& input, std::vector<int>& argmax) {
  if (input.shape.size() != 3)
    throw DimensionError("maxpool: input must be [H,W,C], got " +
                         shape_string(input.shape));
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const int oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1)
    throw DimensionError("maxpool: spatial axis too small to pool, input " +
                         shape_string(input.shape));
  Tensor<T> out({oh, ow, c});
  argmax.assign(out.numel(), 0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        T best = input.at3(2 * y, 2 * x, ch);
        int besti = (2 * y * w + 2 * x) * c + ch;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const T v = input.at3(2 * y + dy, 2 * x + dx, ch);
            if (v > best) {
              best = v;
              besti = ((2 * y + dy) * w + 2 * x + dx) * c + ch;
            }
          }
        }
        out.at3(y, x, ch) = best;
        argmax[(static_cast<std::size_t>(y) * ow + x) * c + ch] = besti;
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <class T>
Tensor<T> fc_forward(const Tensor<T>& input, const FcLayerParams<T>& p) {
  if (static_cast<int>(input.numel()) != p.in())
    throw DimensionError("fc: input axis mismatch, flattened input has " +
                         std::to_string(input.numel()) + " values, weights expect " +
                         std::to_string(p.in()));
  Tensor<T> out({p.out()});
  for (int o = 0; o < p.out(); ++o) out[o] = p.bias[o];
  for (int i = 0; i < p.in(); ++i) {
    const T xv = input[i];
    const T* wrow = &p.weights.data[static_cast<std::size_t>(i) * p.out()];
    for (int o = 0; o < p.out(); ++o) out[o] += xv * wrow[o];
  }
  return out;
}

// Max-shifted softmax.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  Tensor<T> out = logits;
  T mx = out.data[0];
  for (const T v : out.data) mx = std::max(mx, v);
  T sum = T(0);
  for (T& v : out.data) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (T& v : out.data) v /= sum;
  return out;
}

// -log(probs[label]), clamped so a zero probability yields -log(1e-12).
template <class T>
T cross_entropy_loss(const Tensor<T>& probs, int label) {
  if (label < 0 || label >= static_cast<int>(probs.numel()))
    throw DimensionError("cross_entropy: label " + std::to_string(label) +
                         " out of range for " + std::to_string(probs.numel()) +
                         " classes");
  const T eps = static_cast<T>(1e-12);
  return -std::log(std::max(probs[label], eps));
}

}  // namespace bl
