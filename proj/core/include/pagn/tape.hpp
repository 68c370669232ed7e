#pragma once

#include <functional>
#include <vector>

#include "pagn/ops.hpp"
#include "pagn/tensor.hpp"

namespace pagn {

/// Reverse-mode autodiff over a linear record of operations. Node ids are
/// creation-ordered, so the record is already topologically sorted and one
/// reverse sweep visits every node exactly once.
template <typename T>
class TapeT {
 public:
  using Id = std::int32_t;

  Id leaf(TensorT<T> v, bool requires_grad = false);

  const TensorT<T>& val(Id id) const { return node(id).value; }
  /// Accumulated gradient; zeros if the node was never reached.
  TensorT<T> grad_of(Id id) const;
  bool requires_grad(Id id) const { return node(id).requires_grad; }

  Id conv2d(Id x, Id w, Id b, int stride, int pad);
  Id conv_transpose2d(Id x, Id w, Id b, int stride, int pad, int out_pad);
  Id instance_norm(Id x, T eps);
  // running stats live outside the tape; mutated only when train==true
  Id batch_norm(Id x, Id gamma, Id beta, TensorT<T>* running_mean, TensorT<T>* running_var,
                bool train, T eps, T momentum);
  Id relu(Id x);
  Id leaky_relu(Id x, T slope);
  Id tanh_(Id x);
  Id sigmoid_(Id x);
  Id log_(Id x);
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id add_scalar(Id a, T c);
  Id mul_scalar(Id a, T c);
  Id concat(const std::vector<Id>& parts, int axis);
  Id mean_all(Id x);
  Id sum_all(Id x);
  Id row_sum(Id x);
  Id linear(Id x, Id w, Id b);
  Id global_pool(Id x);
  Id flatten(Id x);
  Id l2_normalize_rows(Id x, T eps);
  Id bce_with_logits(Id z, Id y);

  /// Square helper used all over the losses.
  Id square(Id x) { return mul(x, x); }

  void backward(Id loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT<T> value;
    TensorT<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::function<void(TapeT&)> back;
  };
  std::vector<Node> nodes_;
  bool ran_backward_ = false;

  Node& node(Id id);
  const Node& node(Id id) const;
  Id push(TensorT<T> value, bool requires_grad, std::function<void(TapeT&)> back);
  void accum(Id id, const TensorT<T>& g);
  void accum_move(Id id, TensorT<T>&& g);
  bool has_grad(Id id) const { return !node(id).grad.data.empty(); }
};

using Tape = TapeT<float>;
using Tape64 = TapeT<double>;

extern template class TapeT<float>;
extern template class TapeT<double>;

}  // namespace pagn
