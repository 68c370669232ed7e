#include "pagn/adam.hpp"

#include <cmath>

namespace pagn {

template <typename T>
AdamStateT<T> AdamStateT<T>::init_for(const ParameterSetT<T>& params) {
  AdamStateT<T> s;
  s.m.reserve(std::size_t(params.size()));
  s.v.reserve(std::size_t(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params[i].value.shape);
    s.v.emplace_back(params[i].value.shape);
  }
  return s;
}

template <typename T>
void adam_step(ParameterSetT<T>& params, AdamStateT<T>& state, T lr, T l2_decay) {
  check(lr > T(0), "adam: learning rate must be positive");
  check(int(state.m.size()) == params.size(), "adam: state does not match parameter set");
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.step));
  const double c2 = 1.0 - std::pow(b2, double(state.step));
  for (int i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    check(state.m[std::size_t(i)].same_shape(p.value), "adam: moment shape mismatch");
    T* m = state.m[std::size_t(i)].ptr();
    T* v = state.v[std::size_t(i)].ptr();
    T* w = p.value.ptr();
    const T* g = p.grad.ptr();
    for (std::int64_t j = 0; j < p.value.numel(); ++j) {
      const T gj = l2_decay != T(0) ? g[j] + l2_decay * w[j] : g[j];
      m[j] = T(b1) * m[j] + T(1.0 - b1) * gj;
      v[j] = T(b2) * v[j] + T(1.0 - b2) * gj * gj;
      const double mh = m[j] / c1;
      const double vh = v[j] / c2;
      w[j] -= T(double(lr) * mh / (std::sqrt(vh) + double(state.eps)));
    }
  }
}

double lr_at(long long iteration, double lr0, long long interval, double factor) {
  check(iteration >= 0, "lr_at: negative iteration");
  check(interval > 0, "lr_at: non-positive interval");
  return lr0 * std::pow(factor, double(iteration / interval));
}

template struct AdamStateT<float>;
template struct AdamStateT<double>;
template void adam_step<float>(ParameterSetT<float>&, AdamStateT<float>&, float, float);
template void adam_step<double>(ParameterSetT<double>&, AdamStateT<double>&, double, double);

}  // namespace pagn
