#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "pagn/common.hpp"

namespace pagn {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);  // validates positive dims
std::string shape_str(const Shape& s);
bool shape_eq(const Shape& a, const Shape& b);

/// Dense row-major n-d array. float for training, double for gradient checks.
template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(shape_numel(shape)), T(0));
  }
  TensorT(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    check(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
          "tensor: data length " + std::to_string(data.size()) + " does not match shape " +
              shape_str(shape));
  }

  static TensorT full(Shape s, T v) {
    TensorT t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static TensorT scalar(T v) { return full({1}, v); }
  static TensorT from(Shape s, std::initializer_list<T> vals) {
    return TensorT(std::move(s), std::vector<T>(vals));
  }

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  bool same_shape(const TensorT& o) const { return shape_eq(shape, o.shape); }
  bool all_finite() const;

  /// Converting copy (float <-> double), used by the gradient-check harness.
  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

extern template struct TensorT<float>;
extern template struct TensorT<double>;

}  // namespace pagn
