#include "pagn/params.hpp"

namespace pagn {

template <typename T>
int ParameterSetT<T>::add(std::string name, TensorT<T> value, bool trainable) {
  check(index_of(name) < 0, "parameters: duplicate name '" + name + "'");
  ParameterT<T> p;
  p.name = std::move(name);
  p.grad = TensorT<T>(value.shape);
  p.value = std::move(value);
  p.trainable = trainable;
  items_.push_back(std::move(p));
  return int(items_.size() - 1);
}

template <typename T>
int ParameterSetT<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].name == name) return int(i);
  return -1;
}

template <typename T>
ParameterT<T>& ParameterSetT<T>::at(const std::string& name) {
  const int i = index_of(name);
  check(i >= 0, "parameters: unknown name '" + name + "'");
  return items_[std::size_t(i)];
}

template <typename T>
const ParameterT<T>& ParameterSetT<T>::at(const std::string& name) const {
  const int i = index_of(name);
  check(i >= 0, "parameters: unknown name '" + name + "'");
  return items_[std::size_t(i)];
}

template <typename T>
void ParameterSetT<T>::zero_grads() {
  for (auto& p : items_) std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
}

template <typename T>
void ParameterSetT<T>::freeze() {
  for (auto& p : items_) p.trainable = false;
}

template <typename T>
std::int64_t ParameterSetT<T>::numel() const {
  std::int64_t n = 0;
  for (const auto& p : items_) n += p.value.numel();
  return n;
}

template class ParameterSetT<float>;
template class ParameterSetT<double>;

}  // namespace pagn
