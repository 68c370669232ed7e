#pragma once

#include <string>
#include <vector>

#include "pagn/tensor.hpp"

namespace pagn {

template <typename T>
struct ParameterT {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;  // always same shape as value
  bool trainable = true;
};

/// Ordered, uniquely named parameter collection. Order is the contract the
/// checkpoint format and the tape binding rely on.
template <typename T>
class ParameterSetT {
 public:
  int add(std::string name, TensorT<T> value, bool trainable = true);

  int size() const { return int(items_.size()); }
  ParameterT<T>& operator[](int i) { return items_[std::size_t(i)]; }
  const ParameterT<T>& operator[](int i) const { return items_[std::size_t(i)]; }
  int index_of(const std::string& name) const;  // -1 if absent
  ParameterT<T>& at(const std::string& name);
  const ParameterT<T>& at(const std::string& name) const;

  void zero_grads();
  void freeze();  // marks everything non-trainable
  std::int64_t numel() const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<ParameterT<T>> items_;
};

using ParameterSet = ParameterSetT<float>;

extern template class ParameterSetT<float>;
extern template class ParameterSetT<double>;

}  // namespace pagn
