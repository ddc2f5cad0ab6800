#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bl {

// Shape mismatch anywhere in the tensor pipeline. The message names the
// offending axis.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

// Dense row-major n-d array. For [H,W,C] layouts the channel axis is
// contiguous.
template <class T = double>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T(0))
      : shape(std::move(s)), data(numel_of(shape), fill) {
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] <= 0)
        throw DimensionError("tensor axis " + std::to_string(i) +
                             " must be positive, got shape " + shape_string(shape));
    }
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d > 0 ? d : 0);
    return n;
  }

  std::size_t numel() const { return data.size(); }

  int dim(std::size_t axis) const { return shape.at(axis); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // [H,W,C]
  T& at3(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
  }
  const T& at3(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
  }

  // [H,W]
  T& at2(int y, int x) { return data[static_cast<std::size_t>(y) * shape[1] + x]; }
  const T& at2(int y, int x) const {
    return data[static_cast<std::size_t>(y) * shape[1] + x];
  }

  // [I,J]
  T& mat(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  const T& mat(int i, int j) const {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
  }
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.shape = t.shape;
  out.data.resize(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i)
    out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

inline void require_shape(const std::vector<int>& got, const std::vector<int>& want,
                          const char* what) {
  if (got != want)
    throw DimensionError(std::string(what) + ": expected shape " + shape_string(want) +
                         ", got " + shape_string(got));
}

}  // namespace bl
