#include "pagn/tape.hpp"

#include <cmath>

namespace pagn {

template <typename T>
typename TapeT<T>::Node& TapeT<T>::node(Id id) {
  check(id >= 0 && id < Id(nodes_.size()), "tape: node id out of range");
  return nodes_[std::size_t(id)];
}

template <typename T>
const typename TapeT<T>::Node& TapeT<T>::node(Id id) const {
  check(id >= 0 && id < Id(nodes_.size()), "tape: node id out of range");
  return nodes_[std::size_t(id)];
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::push(TensorT<T> value, bool requires_grad,
                                     std::function<void(TapeT&)> back) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(back)});
  return Id(nodes_.size() - 1);
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::leaf(TensorT<T> v, bool requires_grad) {
  check(!v.data.empty(), "tape: leaf with empty tensor");
  return push(std::move(v), requires_grad, nullptr);
}

template <typename T>
TensorT<T> TapeT<T>::grad_of(Id id) const {
  const Node& n = node(id);
  if (n.grad.data.empty()) return TensorT<T>(n.value.shape);
  return n.grad;
}

template <typename T>
void TapeT<T>::accum(Id id, const TensorT<T>& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (n.grad.data.empty()) {
    n.grad = g;
    return;
  }
  for (std::int64_t i = 0; i < g.numel(); ++i) n.grad.data[i] += g.data[i];
}

template <typename T>
void TapeT<T>::accum_move(Id id, TensorT<T>&& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (n.grad.data.empty()) {
    n.grad = std::move(g);
    return;
  }
  for (std::int64_t i = 0; i < g.numel(); ++i) n.grad.data[i] += g.data[i];
}

template <typename T>
void TapeT<T>::backward(Id loss) {
  check(!ran_backward_, "tape: backward already ran");
  check(node(loss).value.numel() == 1, "tape: loss must be a scalar");
  ran_backward_ = true;
  node(loss).grad = TensorT<T>::scalar(T(1));
  if (!node(loss).requires_grad) return;
  for (Id id = loss; id >= 0; --id) {
    Node& n = nodes_[std::size_t(id)];
    if (!n.requires_grad || n.grad.data.empty() || !n.back) continue;
    n.back(*this);
  }
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::conv2d(Id x, Id w, Id b, int stride, int pad) {
  TensorT<T> out = ops::conv2d(val(x), val(w), val(b), stride, pad);
  const bool rq = requires_grad(x) || requires_grad(w) || requires_grad(b);
  Id out_id = push(std::move(out), rq, nullptr);
  if (rq)
    node(out_id).back = [x, w, b, stride, pad, out_id](TapeT& t) {
      TensorT<T> gx, gw, gb;
      const bool nx = t.requires_grad(x), nw = t.requires_grad(w), nb = t.requires_grad(b);
      ops::conv2d_backward(t.val(x), t.val(w), stride, pad, t.node(out_id).grad,
                           nx ? &gx : nullptr, nw ? &gw : nullptr, nb ? &gb : nullptr);
      if (nx) t.accum_move(x, std::move(gx));
      if (nw) t.accum_move(w, std::move(gw));
      if (nb) t.accum_move(b, std::move(gb));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::conv_transpose2d(Id x, Id w, Id b, int stride, int pad,
                                                 int out_pad) {
  TensorT<T> out = ops::conv_transpose2d(val(x), val(w), val(b), stride, pad, out_pad);
  const bool rq = requires_grad(x) || requires_grad(w) || requires_grad(b);
  Id out_id = push(std::move(out), rq, nullptr);
  if (rq)
    node(out_id).back = [x, w, b, stride, pad, out_pad, out_id](TapeT& t) {
      TensorT<T> gx, gw, gb;
      const bool nx = t.requires_grad(x), nw = t.requires_grad(w), nb = t.requires_grad(b);
      ops::conv_transpose2d_backward(t.val(x), t.val(w), stride, pad, out_pad,
                                     t.node(out_id).grad, nx ? &gx : nullptr, nw ? &gw : nullptr,
                                     nb ? &gb : nullptr);
      if (nx) t.accum_move(x, std::move(gx));
      if (nw) t.accum_move(w, std::move(gw));
      if (nb) t.accum_move(b, std::move(gb));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::instance_norm(Id x, T eps) {
  TensorT<T> mean, istd;
  TensorT<T> out = ops::instance_norm(val(x), eps, &mean, &istd);
  const bool rq = requires_grad(x);
  Id out_id = push(std::move(out), rq, nullptr);
  if (rq)
    node(out_id).back = [x, out_id, mean = std::move(mean), istd = std::move(istd)](TapeT& t) {
      t.accum_move(x, ops::instance_norm_backward(t.val(x), mean, istd, t.node(out_id).grad));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::batch_norm(Id x, Id gamma, Id beta, TensorT<T>* running_mean,
                                           TensorT<T>* running_var, bool train, T eps,
                                           T momentum) {
  check(running_mean && running_var, "batch_norm: missing running stats");
  TensorT<T> mean, istd;
  TensorT<T> out = ops::batch_norm(val(x), val(gamma), val(beta), *running_mean, *running_var,
                                   train, eps, momentum, &mean, &istd);
  const bool rq = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  Id out_id = push(std::move(out), rq, nullptr);
  if (rq)
    node(out_id).back = [x, gamma, beta, train, out_id, mean = std::move(mean),
                         istd = std::move(istd)](TapeT& t) {
      TensorT<T> gx, gg, gb;
      const bool nx = t.requires_grad(x), ng = t.requires_grad(gamma), nb = t.requires_grad(beta);
      ops::batch_norm_backward(t.val(x), t.val(gamma), mean, istd, train, t.node(out_id).grad,
                               nx ? &gx : nullptr, ng ? &gg : nullptr, nb ? &gb : nullptr);
      if (nx) t.accum_move(x, std::move(gx));
      if (ng) t.accum_move(gamma, std::move(gg));
      if (nb) t.accum_move(beta, std::move(gb));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::relu(Id x) {
  Id out_id = push(ops::relu(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const TensorT<T>& xv = t.val(x);
      const TensorT<T>& g = t.node(out_id).grad;
      TensorT<T> gx(xv.shape);
      for (std::int64_t i = 0; i < xv.numel(); ++i)
        gx.data[i] = xv.data[i] > T(0) ? g.data[i] : T(0);
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::leaky_relu(Id x, T slope) {
  Id out_id = push(ops::leaky_relu(val(x), slope), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, slope, out_id](TapeT& t) {
      const TensorT<T>& xv = t.val(x);
      const TensorT<T>& g = t.node(out_id).grad;
      TensorT<T> gx(xv.shape);
      for (std::int64_t i = 0; i < xv.numel(); ++i)
        gx.data[i] = xv.data[i] >= T(0) ? g.data[i] : slope * g.data[i];
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::tanh_(Id x) {
  Id out_id = push(ops::tanh_op(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const TensorT<T>& y = t.val(out_id);
      const TensorT<T>& g = t.node(out_id).grad;
      TensorT<T> gx(y.shape);
      for (std::int64_t i = 0; i < y.numel(); ++i)
        gx.data[i] = g.data[i] * (T(1) - y.data[i] * y.data[i]);
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::sigmoid_(Id x) {
  Id out_id = push(ops::sigmoid(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const TensorT<T>& y = t.val(out_id);
      const TensorT<T>& g = t.node(out_id).grad;
      TensorT<T> gx(y.shape);
      for (std::int64_t i = 0; i < y.numel(); ++i)
        gx.data[i] = g.data[i] * y.data[i] * (T(1) - y.data[i]);
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::log_(Id x) {
  Id out_id = push(ops::log_op(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const TensorT<T>& xv = t.val(x);
      const TensorT<T>& g = t.node(out_id).grad;
      TensorT<T> gx(xv.shape);
      for (std::int64_t i = 0; i < xv.numel(); ++i) gx.data[i] = g.data[i] / xv.data[i];
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::add(Id a, Id b) {
  const bool rq = requires_grad(a) || requires_grad(b);
  Id out_id = push(ops::add(val(a), val(b)), rq, nullptr);
  if (rq)
    node(out_id).back = [a, b, out_id](TapeT& t) {
      t.accum(a, t.node(out_id).grad);
      t.accum(b, t.node(out_id).grad);
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::sub(Id a, Id b) {
  const bool rq = requires_grad(a) || requires_grad(b);
  Id out_id = push(ops::sub(val(a), val(b)), rq, nullptr);
  if (rq)
    node(out_id).back = [a, b, out_id](TapeT& t) {
      t.accum(a, t.node(out_id).grad);
      if (t.requires_grad(b)) t.accum_move(b, ops::mul_scalar(t.node(out_id).grad, T(-1)));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::mul(Id a, Id b) {
  const bool rq = requires_grad(a) || requires_grad(b);
  Id out_id = push(ops::mul(val(a), val(b)), rq, nullptr);
  if (rq)
    node(out_id).back = [a, b, out_id](TapeT& t) {
      if (t.requires_grad(a)) t.accum_move(a, ops::mul(t.node(out_id).grad, t.val(b)));
      if (t.requires_grad(b)) t.accum_move(b, ops::mul(t.node(out_id).grad, t.val(a)));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::add_scalar(Id a, T c) {
  Id out_id = push(ops::add_scalar(val(a), c), requires_grad(a), nullptr);
  if (requires_grad(a))
    node(out_id).back = [a, out_id](TapeT& t) { t.accum(a, t.node(out_id).grad); };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::mul_scalar(Id a, T c) {
  Id out_id = push(ops::mul_scalar(val(a), c), requires_grad(a), nullptr);
  if (requires_grad(a))
    node(out_id).back = [a, c, out_id](TapeT& t) {
      t.accum_move(a, ops::mul_scalar(t.node(out_id).grad, c));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::concat(const std::vector<Id>& parts, int axis) {
  std::vector<const TensorT<T>*> vs;
  bool rq = false;
  for (Id p : parts) {
    vs.push_back(&val(p));
    rq = rq || requires_grad(p);
  }
  Id out_id = push(ops::concat(vs, axis), rq, nullptr);
  if (rq)
    node(out_id).back = [parts, axis, out_id](TapeT& t) {
      const TensorT<T>& g = t.node(out_id).grad;
      const Shape& os = g.shape;
      std::int64_t outer = 1, inner = 1;
      for (int i = 0; i < axis; ++i) outer *= os[std::size_t(i)];
      for (int i = axis + 1; i < int(os.size()); ++i) inner *= os[std::size_t(i)];
      std::int64_t off = 0;
      for (Id p : parts) {
        const Shape& ps = t.val(p).shape;
        const std::int64_t rows = ps[std::size_t(axis)] * inner;
        if (t.requires_grad(p)) {
          TensorT<T> gp(ps);
          for (std::int64_t o = 0; o < outer; ++o)
            std::copy(g.ptr() + (o * os[std::size_t(axis)] * inner + off),
                      g.ptr() + (o * os[std::size_t(axis)] * inner + off) + rows,
                      gp.ptr() + o * rows);
          t.accum_move(p, std::move(gp));
        }
        off += rows;
      }
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::mean_all(Id x) {
  Id out_id = push(ops::mean_all(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const T g = t.node(out_id).grad.data[0];
      const TensorT<T>& xv = t.val(x);
      t.accum_move(x, TensorT<T>::full(xv.shape, g / T(double(xv.numel()))));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::sum_all(Id x) {
  Id out_id = push(ops::sum_all(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const T g = t.node(out_id).grad.data[0];
      t.accum_move(x, TensorT<T>::full(t.val(x).shape, g));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::row_sum(Id x) {
  Id out_id = push(ops::row_sum(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const TensorT<T>& g = t.node(out_id).grad;
      const TensorT<T>& xv = t.val(x);
      const int n = xv.dim(0), f = xv.dim(1);
      TensorT<T> gx(xv.shape);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j) gx.data[std::int64_t(i) * f + j] = g.data[i];
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::linear(Id x, Id w, Id b) {
  const bool rq = requires_grad(x) || requires_grad(w) || requires_grad(b);
  Id out_id = push(ops::linear(val(x), val(w), val(b)), rq, nullptr);
  if (rq)
    node(out_id).back = [x, w, b, out_id](TapeT& t) {
      TensorT<T> gx, gw, gb;
      const bool nx = t.requires_grad(x), nw = t.requires_grad(w), nb = t.requires_grad(b);
      ops::linear_backward(t.val(x), t.val(w), t.node(out_id).grad, nx ? &gx : nullptr,
                           nw ? &gw : nullptr, nb ? &gb : nullptr);
      if (nx) t.accum_move(x, std::move(gx));
      if (nw) t.accum_move(w, std::move(gw));
      if (nb) t.accum_move(b, std::move(gb));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::global_pool(Id x) {
  Id out_id = push(ops::global_pool(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      const TensorT<T>& xv = t.val(x);
      const TensorT<T>& g = t.node(out_id).grad;
      const bool batched = xv.rank() == 4;
      const int nc = batched ? xv.dim(0) * xv.dim(1) : xv.dim(0);
      const std::int64_t hw = xv.numel() / nc;
      TensorT<T> gx(xv.shape);
      for (int i = 0; i < nc; ++i) {
        const T gv = g.data[i] / T(double(hw));
        T* p = gx.ptr() + std::int64_t(i) * hw;
        for (std::int64_t j = 0; j < hw; ++j) p[j] = gv;
      }
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::flatten(Id x) {
  Id out_id = push(ops::flatten(val(x)), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id](TapeT& t) {
      TensorT<T> gx(t.val(x).shape);
      gx.data = t.node(out_id).grad.data;
      t.accum_move(x, std::move(gx));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::l2_normalize_rows(Id x, T eps) {
  TensorT<T> norm;
  Id out_id = push(ops::l2_normalize_rows(val(x), eps, &norm), requires_grad(x), nullptr);
  if (requires_grad(x))
    node(out_id).back = [x, out_id, norm = std::move(norm)](TapeT& t) {
      t.accum_move(x, ops::l2_normalize_rows_backward(t.val(x), norm, t.node(out_id).grad));
    };
  return out_id;
}

template <typename T>
typename TapeT<T>::Id TapeT<T>::bce_with_logits(Id z, Id y) {
  const bool rq = requires_grad(z) || requires_grad(y);
  Id out_id = push(ops::bce_with_logits(val(z), val(y)), rq, nullptr);
  if (rq)
    node(out_id).back = [z, y, out_id](TapeT& t) {
      const T g = t.node(out_id).grad.data[0];
      if (t.requires_grad(z))
        t.accum_move(z, ops::bce_with_logits_backward(t.val(z), t.val(y), g));
      if (t.requires_grad(y)) {
        const TensorT<T>& zv = t.val(z);
        TensorT<T> gy(zv.shape);
        const T scale = g / T(double(zv.numel()));
        for (std::int64_t i = 0; i < zv.numel(); ++i) gy.data[i] = -zv.data[i] * scale;
        t.accum_move(y, std::move(gy));
      }
    };
  return out_id;
}

template class TapeT<float>;
template class TapeT<double>;

}  // namespace pagn
