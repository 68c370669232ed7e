#pragma once

#include <optional>

#include "pagn/tensor.hpp"

// Value-level kernels. The autodiff tape wraps these; evaluation-mode code
// calls them directly. Every kernel accumulates each output element in a
// fixed order, so results do not depend on the worker-thread count.
namespace pagn::ops {

struct ConvDims {
  int n, cin, h, w, cout, k, stride, pad, out_pad, hout, wout;
  bool batched;  // rank-4 input (output keeps the rank of the input)
};

ConvDims conv2d_dims(const Shape& x, const Shape& w, int stride, int pad);
ConvDims conv_transpose2d_dims(const Shape& x, const Shape& w, int stride, int pad, int out_pad);

// x: [Cin,H,W] or [N,Cin,H,W]; w: [Cout,Cin,k,k]; b: [Cout]
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int pad);
template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, int stride, int pad,
                     const TensorT<T>& gout, TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb);

// x: [Cin,H,W] or [N,Cin,H,W]; w: [Cin,Cout,k,k]; b: [Cout]
template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            int stride, int pad, int out_pad);
template <typename T>
void conv_transpose2d_backward(const TensorT<T>& x, const TensorT<T>& w, int stride, int pad,
                               int out_pad, const TensorT<T>& gout, TensorT<T>* gx, TensorT<T>* gw,
                               TensorT<T>* gb);

// Per (sample, channel) normalization, no affine. saved = {mean, inv_std} per slice.
template <typename T>
TensorT<T> instance_norm(const TensorT<T>& x, T eps, TensorT<T>* saved_mean = nullptr,
                         TensorT<T>* saved_istd = nullptr);
template <typename T>
TensorT<T> instance_norm_backward(const TensorT<T>& x, const TensorT<T>& saved_mean,
                                  const TensorT<T>& saved_istd, const TensorT<T>& gout);

// Train mode normalizes over (N,H,W) per channel and updates running stats
// in place (running_var holds the biased batch variance). Eval mode uses the
// running stats and never writes them.
template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      TensorT<T>& running_mean, TensorT<T>& running_var, bool train, T eps,
                      T momentum, TensorT<T>* saved_mean = nullptr, TensorT<T>* saved_istd = nullptr);
template <typename T>
void batch_norm_backward(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& saved_mean,
                         const TensorT<T>& saved_istd, bool train, const TensorT<T>& gout,
                         TensorT<T>* gx, TensorT<T>* ggamma, TensorT<T>* gbeta);

template <typename T> TensorT<T> relu(const TensorT<T>& x);
template <typename T> TensorT<T> leaky_relu(const TensorT<T>& x, T slope);
template <typename T> TensorT<T> tanh_op(const TensorT<T>& x);
template <typename T> TensorT<T> sigmoid(const TensorT<T>& x);
template <typename T> TensorT<T> log_op(const TensorT<T>& x);

template <typename T> TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> add_scalar(const TensorT<T>& a, T c);
template <typename T> TensorT<T> mul_scalar(const TensorT<T>& a, T c);

template <typename T>
TensorT<T> concat(const std::vector<const TensorT<T>*>& parts, int axis);

template <typename T> TensorT<T> mean_all(const TensorT<T>& x);   // -> [1]
template <typename T> TensorT<T> sum_all(const TensorT<T>& x);    // -> [1]
template <typename T> TensorT<T> row_sum(const TensorT<T>& x);    // [N,F] -> [N]

// y = x . w^T + b ; x: [N,F], w: [O,F], b: [O]
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b);
template <typename T>
void linear_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gout,
                     TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb);

template <typename T> TensorT<T> global_pool(const TensorT<T>& x);  // mean over H,W
template <typename T> TensorT<T> flatten(const TensorT<T>& x);      // keep dim0, fold the rest

template <typename T>
TensorT<T> l2_normalize_rows(const TensorT<T>& x, T eps, TensorT<T>* saved_norm = nullptr);
template <typename T>
TensorT<T> l2_normalize_rows_backward(const TensorT<T>& x, const TensorT<T>& saved_norm,
                                      const TensorT<T>& gout);

// Numerically stable mean BCE over all elements; targets in [0,1].
template <typename T>
TensorT<T> bce_with_logits(const TensorT<T>& z, const TensorT<T>& y);
template <typename T>
TensorT<T> bce_with_logits_backward(const TensorT<T>& z, const TensorT<T>& y, T gout);

// C[M,N] (+)= A[M,K] * B[K,N]; fixed k-ascending accumulation per element.
template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);

}  // namespace pagn::ops
