#pragma once

#include "pagn/params.hpp"

namespace pagn {

/// Adam with bias correction. Moment slots parallel the parameter set; slots
/// of non-trainable parameters stay zero.
template <typename T>
struct AdamStateT {
  T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);
  long long step = 0;
  std::vector<TensorT<T>> m, v;

  static AdamStateT init_for(const ParameterSetT<T>& params);
};

/// One update from the gradients currently held in `params`. `l2_decay`
/// adds l2_decay * value into the gradient before the moment updates
/// (the optional weight-decay reading of the schedule; default off).
template <typename T>
void adam_step(ParameterSetT<T>& params, AdamStateT<T>& state, T lr, T l2_decay = T(0));

/// Stepwise learning-rate decay: lr0 * factor^floor(iteration / interval).
double lr_at(long long iteration, double lr0, long long interval = 2000, double factor = 0.5);

using AdamState = AdamStateT<float>;

extern template struct AdamStateT<float>;
extern template struct AdamStateT<double>;
extern template void adam_step<float>(ParameterSetT<float>&, AdamStateT<float>&, float, float);
extern template void adam_step<double>(ParameterSetT<double>&, AdamStateT<double>&, double, double);

}  // namespace pagn
