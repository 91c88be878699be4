#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace presto {

template <typename S>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int64_t> sh, S fill = S(0))
      : shape(std::move(sh)), data(size_t(numel_of(shape)), fill) {}
  TensorT(std::vector<int64_t> sh, std::vector<S> d)
      : shape(std::move(sh)), data(std::move(d)) {
    if (numel_of(shape) != int64_t(data.size()))
      throw std::invalid_argument("tensor: shape/data size mismatch");
  }

  static int64_t numel_of(const std::vector<int64_t>& sh) {
    int64_t n = 1;
    for (int64_t e : sh) {
      if (e <= 0) throw std::invalid_argument("tensor: non-positive extent");
      n *= e;
    }
    return n;
  }

  int64_t numel() const { return int64_t(data.size()); }
  bool is_scalar() const { return data.size() == 1; }

  // 2-D accessors; most tape ops work on matrices.
  int64_t rows() const { assert(shape.size() == 2); return shape[0]; }
  int64_t cols() const { assert(shape.size() == 2); return shape[1]; }
  S& at(int64_t r, int64_t c) { return data[size_t(r * cols() + c)]; }
  S at(int64_t r, int64_t c) const { return data[size_t(r * cols() + c)]; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

}  // namespace presto
