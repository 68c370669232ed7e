#include "pagn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pagn::ops {

namespace {

template <typename T>
std::vector<T>& scratch(int which) {
  thread_local std::vector<T> bufs[4];
  return bufs[which];
}

// col[(c*k+ky)*k+kx][y*ow+x] = src[c, y*stride-pad+ky, x*stride-pad+kx] (0 outside)
template <typename T>
void im2col(const T* src, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            T* col) {
  const std::int64_t plane = std::int64_t(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + ((std::int64_t(ci) * k + ky) * k + kx) * plane;
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride - pad + ky;
          if (sy < 0 || sy >= h) {
            std::fill(dst + std::int64_t(y) * ow, dst + std::int64_t(y + 1) * ow, T(0));
            continue;
          }
          const T* row = src + (std::int64_t(ci) * h + sy) * w;
          T* out = dst + std::int64_t(y) * ow;
          for (int x = 0; x < ow; ++x) {
            const int sx = x * stride - pad + kx;
            out[x] = (sx >= 0 && sx < w) ? row[sx] : T(0);
          }
        }
      }
    }
  }
}

// As above but the source is conceptually dilated by `dil` (zeros between
// elements). Serves transposed convolution and conv input gradients.
template <typename T>
void im2col_dilated(const T* src, int c, int h, int w, int k, int dil, int pad, int oh, int ow,
                    T* col) {
  const std::int64_t plane = std::int64_t(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + ((std::int64_t(ci) * k + ky) * k + kx) * plane;
        for (int y = 0; y < oh; ++y) {
          T* out = dst + std::int64_t(y) * ow;
          const int sy = y - pad + ky;
          if (sy < 0 || sy % dil != 0 || sy / dil >= h) {
            std::fill(out, out + ow, T(0));
            continue;
          }
          const T* row = src + (std::int64_t(ci) * h + sy / dil) * w;
          for (int x = 0; x < ow; ++x) {
            const int sx = x - pad + kx;
            out[x] = (sx >= 0 && sx % dil == 0 && sx / dil < w) ? row[sx / dil] : T(0);
          }
        }
      }
    }
  }
}

// C[M,K'] (+)= A[M,N] * B[K',N]^T; per-element accumulation runs n-ascending.
template <typename T>
void gemm_abt(const T* a, const T* b, T* c, int m, int n, int kk, bool accumulate) {
  const int nt = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(static) if (nt > 1)
#endif
  for (int i = 0; i < m; ++i) {
    const T* ar = a + std::int64_t(i) * n;
    T* cr = c + std::int64_t(i) * kk;
    for (int j = 0; j < kk; ++j) {
      const T* br = b + std::int64_t(j) * n;
      T acc = accumulate ? cr[j] : T(0);
      for (int t = 0; t < n; ++t) acc += ar[t] * br[t];
      cr[j] = acc;
    }
  }
}

int conv_out(int h, int k, int stride, int pad) { return (h + 2 * pad - k) / stride + 1; }

template <typename T>
void add_bias_rows(T* out, const T* b, int cout, std::int64_t plane) {
  for (int co = 0; co < cout; ++co) {
    const T bv = b[co];
    T* row = out + co * plane;
    for (std::int64_t i = 0; i < plane; ++i) row[i] += bv;
  }
}

}  // namespace

template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  const int nt = worker_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(static) if (nt > 1 && m >= 2 * nt)
#endif
  for (int i = 0; i < m; ++i) {
    T* cr = c + std::int64_t(i) * n;
    if (!accumulate) std::fill(cr, cr + n, T(0));
    const T* ar = a + std::int64_t(i) * k;
    for (int t = 0; t < k; ++t) {
      const T av = ar[t];
      if (av == T(0)) continue;
      const T* br = b + std::int64_t(t) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

ConvDims conv2d_dims(const Shape& x, const Shape& w, int stride, int pad) {
  check(x.size() == 3 || x.size() == 4, "conv2d: input must be rank 3 or 4, got " + shape_str(x));
  check(w.size() == 4, "conv2d: weight must be rank 4, got " + shape_str(w));
  ConvDims d{};
  d.batched = x.size() == 4;
  d.n = d.batched ? x[0] : 1;
  d.cin = d.batched ? x[1] : x[0];
  d.h = d.batched ? x[2] : x[1];
  d.w = d.batched ? x[3] : x[2];
  d.cout = w[0];
  d.k = w[2];
  d.stride = stride;
  d.pad = pad;
  d.out_pad = 0;
  check(w[2] == w[3], "conv2d: kernel must be square, got " + shape_str(w));
  check(w[1] == d.cin, "conv2d: weight expects " + std::to_string(w[1]) + " input channels, input has " +
                           std::to_string(d.cin));
  check(d.k >= 1 && stride >= 1 && pad >= 0, "conv2d: invalid kernel/stride/padding");
  check(d.h + 2 * pad >= d.k && d.w + 2 * pad >= d.k, "conv2d: kernel larger than padded input");
  d.hout = conv_out(d.h, d.k, stride, pad);
  d.wout = conv_out(d.w, d.k, stride, pad);
  return d;
}

ConvDims conv_transpose2d_dims(const Shape& x, const Shape& w, int stride, int pad, int out_pad) {
  check(x.size() == 3 || x.size() == 4,
        "conv_transpose2d: input must be rank 3 or 4, got " + shape_str(x));
  check(w.size() == 4, "conv_transpose2d: weight must be rank 4, got " + shape_str(w));
  ConvDims d{};
  d.batched = x.size() == 4;
  d.n = d.batched ? x[0] : 1;
  d.cin = d.batched ? x[1] : x[0];
  d.h = d.batched ? x[2] : x[1];
  d.w = d.batched ? x[3] : x[2];
  d.cout = w[1];
  d.k = w[2];
  d.stride = stride;
  d.pad = pad;
  d.out_pad = out_pad;
  check(w[2] == w[3], "conv_transpose2d: kernel must be square");
  check(w[0] == d.cin, "conv_transpose2d: weight expects " + std::to_string(w[0]) +
                           " input channels, input has " + std::to_string(d.cin));
  check(d.k >= 1 && stride >= 1 && pad >= 0, "conv_transpose2d: invalid kernel/stride/padding");
  check(out_pad >= 0 && out_pad < stride,
        "conv_transpose2d: output_padding must satisfy 0 <= op < stride");
  d.hout = (d.h - 1) * stride - 2 * pad + d.k + out_pad;
  d.wout = (d.w - 1) * stride - 2 * pad + d.k + out_pad;
  check(d.hout >= 1 && d.wout >= 1, "conv_transpose2d: empty output");
  return d;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int pad) {
  const ConvDims d = conv2d_dims(x.shape, w.shape, stride, pad);
  check(b.rank() == 1 && b.dim(0) == d.cout, "conv2d: bias shape mismatch");
  Shape os = d.batched ? Shape{d.n, d.cout, d.hout, d.wout} : Shape{d.cout, d.hout, d.wout};
  TensorT<T> out(std::move(os));
  const std::int64_t in_sz = std::int64_t(d.cin) * d.h * d.w;
  const std::int64_t out_sz = std::int64_t(d.cout) * d.hout * d.wout;
  const std::int64_t plane = std::int64_t(d.hout) * d.wout;
  const int kdim = d.cin * d.k * d.k;
  auto& col = scratch<T>(0);
  col.resize(std::size_t(kdim) * plane);
  for (int n = 0; n < d.n; ++n) {
    im2col(x.ptr() + n * in_sz, d.cin, d.h, d.w, d.k, stride, pad, d.hout, d.wout, col.data());
    gemm(w.ptr(), col.data(), out.ptr() + n * out_sz, d.cout, kdim, int(plane), false);
    add_bias_rows(out.ptr() + n * out_sz, b.ptr(), d.cout, plane);
  }
  return out;
}

template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, int stride, int pad,
                     const TensorT<T>& gout, TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb) {
  const ConvDims d = conv2d_dims(x.shape, w.shape, stride, pad);
  const std::int64_t in_sz = std::int64_t(d.cin) * d.h * d.w;
  const std::int64_t out_sz = std::int64_t(d.cout) * d.hout * d.wout;
  const std::int64_t plane = std::int64_t(d.hout) * d.wout;
  const int kdim = d.cin * d.k * d.k;
  if (gb) {
    *gb = TensorT<T>({d.cout});
    for (int n = 0; n < d.n; ++n)
      for (int co = 0; co < d.cout; ++co) {
        double acc = 0;
        const T* g = gout.ptr() + n * out_sz + co * plane;
        for (std::int64_t i = 0; i < plane; ++i) acc += g[i];
        gb->data[co] += T(acc);
      }
  }
  if (gw) {
    *gw = TensorT<T>(w.shape);
    auto& col = scratch<T>(0);
    col.resize(std::size_t(kdim) * plane);
    for (int n = 0; n < d.n; ++n) {
      im2col(x.ptr() + n * in_sz, d.cin, d.h, d.w, d.k, stride, pad, d.hout, d.wout, col.data());
      gemm_abt(gout.ptr() + n * out_sz, col.data(), gw->ptr(), d.cout, int(plane), kdim, true);
    }
  }
  if (gx) {
    *gx = TensorT<T>(x.shape);
    // in-grad = stride-1 conv of the dilated out-grad with flipped weights
    auto& wf = scratch<T>(1);
    wf.resize(std::size_t(d.cin) * d.cout * d.k * d.k);
    for (int ci = 0; ci < d.cin; ++ci)
      for (int co = 0; co < d.cout; ++co)
        for (int ky = 0; ky < d.k; ++ky)
          for (int kx = 0; kx < d.k; ++kx)
            wf[((std::int64_t(ci) * d.cout + co) * d.k + ky) * d.k + kx] =
                w.data[((std::int64_t(co) * d.cin + ci) * d.k + (d.k - 1 - ky)) * d.k +
                       (d.k - 1 - kx)];
    const int kdim2 = d.cout * d.k * d.k;
    const std::int64_t plane_in = std::int64_t(d.h) * d.w;
    auto& col = scratch<T>(2);
    col.resize(std::size_t(kdim2) * plane_in);
    for (int n = 0; n < d.n; ++n) {
      im2col_dilated(gout.ptr() + n * out_sz, d.cout, d.hout, d.wout, d.k, stride, d.k - 1 - pad,
                     d.h, d.w, col.data());
      gemm(wf.data(), col.data(), gx->ptr() + n * in_sz, d.cin, kdim2, int(plane_in), false);
    }
  }
}

template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            int stride, int pad, int out_pad) {
  const ConvDims d = conv_transpose2d_dims(x.shape, w.shape, stride, pad, out_pad);
  check(b.rank() == 1 && b.dim(0) == d.cout, "conv_transpose2d: bias shape mismatch");
  Shape os = d.batched ? Shape{d.n, d.cout, d.hout, d.wout} : Shape{d.cout, d.hout, d.wout};
  TensorT<T> out(std::move(os));
  const std::int64_t in_sz = std::int64_t(d.cin) * d.h * d.w;
  const std::int64_t out_sz = std::int64_t(d.cout) * d.hout * d.wout;
  const std::int64_t plane = std::int64_t(d.hout) * d.wout;
  auto& wf = scratch<T>(1);
  wf.resize(std::size_t(d.cout) * d.cin * d.k * d.k);
  for (int co = 0; co < d.cout; ++co)
    for (int ci = 0; ci < d.cin; ++ci)
      for (int ky = 0; ky < d.k; ++ky)
        for (int kx = 0; kx < d.k; ++kx)
          wf[((std::int64_t(co) * d.cin + ci) * d.k + ky) * d.k + kx] =
              w.data[((std::int64_t(ci) * d.cout + co) * d.k + (d.k - 1 - ky)) * d.k +
                     (d.k - 1 - kx)];
  const int kdim = d.cin * d.k * d.k;
  auto& col = scratch<T>(0);
  col.resize(std::size_t(kdim) * plane);
  for (int n = 0; n < d.n; ++n) {
    im2col_dilated(x.ptr() + n * in_sz, d.cin, d.h, d.w, d.k, stride, d.k - 1 - pad, d.hout,
                   d.wout, col.data());
    gemm(wf.data(), col.data(), out.ptr() + n * out_sz, d.cout, kdim, int(plane), false);
    add_bias_rows(out.ptr() + n * out_sz, b.ptr(), d.cout, plane);
  }
  return out;
}

template <typename T>
void conv_transpose2d_backward(const TensorT<T>& x, const TensorT<T>& w, int stride, int pad,
                               int out_pad, const TensorT<T>& gout, TensorT<T>* gx, TensorT<T>* gw,
                               TensorT<T>* gb) {
  const ConvDims d = conv_transpose2d_dims(x.shape, w.shape, stride, pad, out_pad);
  const std::int64_t in_sz = std::int64_t(d.cin) * d.h * d.w;
  const std::int64_t out_sz = std::int64_t(d.cout) * d.hout * d.wout;
  const std::int64_t plane_out = std::int64_t(d.hout) * d.wout;
  const std::int64_t plane_in = std::int64_t(d.h) * d.w;
  if (gb) {
    *gb = TensorT<T>({d.cout});
    for (int n = 0; n < d.n; ++n)
      for (int co = 0; co < d.cout; ++co) {
        double acc = 0;
        const T* g = gout.ptr() + n * out_sz + co * plane_out;
        for (std::int64_t i = 0; i < plane_out; ++i) acc += g[i];
        gb->data[co] += T(acc);
      }
  }
  // Both remaining gradients read the out-grad through plain conv geometry.
  const int kdim_g = d.cout * d.k * d.k;
  auto& col = scratch<T>(0);
  col.resize(std::size_t(kdim_g) * plane_in);
  const bool need_col = gx || gw;
  if (gx) *gx = TensorT<T>(x.shape);
  if (gw) *gw = TensorT<T>(w.shape);
  if (!need_col) return;
  for (int n = 0; n < d.n; ++n) {
    im2col(gout.ptr() + n * out_sz, d.cout, d.hout, d.wout, d.k, stride, pad, d.h, d.w,
           col.data());
    if (gx)  // w viewed as [cin, cout*k*k]
      gemm(w.ptr(), col.data(), gx->ptr() + n * in_sz, d.cin, kdim_g, int(plane_in), false);
    if (gw)
      gemm_abt(x.ptr() + n * in_sz, col.data(), gw->ptr(), d.cin, int(plane_in), kdim_g, true);
  }
}

namespace {
template <typename T>
void norm_slice_stats(const T* x, std::int64_t m, T eps, T& mean, T& istd) {
  double s = 0;
  for (std::int64_t i = 0; i < m; ++i) s += x[i];
  const double mu = s / double(m);
  double v = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double dxi = x[i] - mu;
    v += dxi * dxi;
  }
  mean = T(mu);
  istd = T(1.0 / std::sqrt(v / double(m) + double(eps)));
}
}  // namespace

template <typename T>
TensorT<T> instance_norm(const TensorT<T>& x, T eps, TensorT<T>* saved_mean,
                         TensorT<T>* saved_istd) {
  check(x.rank() == 3 || x.rank() == 4, "instance_norm: input must be rank 3 or 4");
  check(eps > T(0), "instance_norm: eps must be positive");
  const int slices = x.rank() == 4 ? x.dim(0) * x.dim(1) : x.dim(0);
  const std::int64_t m = x.numel() / slices;
  check(m >= 1, "instance_norm: empty spatial extent");
  TensorT<T> out(x.shape);
  TensorT<T> mean({slices}), istd({slices});
  for (int s = 0; s < slices; ++s) {
    const T* xs = x.ptr() + s * m;
    T* os = out.ptr() + s * m;
    norm_slice_stats(xs, m, eps, mean.data[s], istd.data[s]);
    const T mu = mean.data[s], is = istd.data[s];
    for (std::int64_t i = 0; i < m; ++i) os[i] = (xs[i] - mu) * is;
  }
  if (saved_mean) *saved_mean = std::move(mean);
  if (saved_istd) *saved_istd = std::move(istd);
  return out;
}

template <typename T>
TensorT<T> instance_norm_backward(const TensorT<T>& x, const TensorT<T>& saved_mean,
                                  const TensorT<T>& saved_istd, const TensorT<T>& gout) {
  const int slices = saved_mean.dim(0);
  const std::int64_t m = x.numel() / slices;
  TensorT<T> gx(x.shape);
  for (int s = 0; s < slices; ++s) {
    const T* xs = x.ptr() + s * m;
    const T* gs = gout.ptr() + s * m;
    T* os = gx.ptr() + s * m;
    const T mu = saved_mean.data[s], is = saved_istd.data[s];
    double sum_g = 0, sum_gx = 0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double xh = (xs[i] - mu) * is;
      sum_g += gs[i];
      sum_gx += gs[i] * xh;
    }
    const double mg = sum_g / double(m), mgx = sum_gx / double(m);
    for (std::int64_t i = 0; i < m; ++i) {
      const double xh = (xs[i] - mu) * is;
      os[i] = T(double(is) * (gs[i] - mg - xh * mgx));
    }
  }
  return gx;
}

template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      TensorT<T>& running_mean, TensorT<T>& running_var, bool train, T eps,
                      T momentum, TensorT<T>* saved_mean, TensorT<T>* saved_istd) {
  check(x.rank() == 4, "batch_norm: input must be rank 4 [N,C,H,W]");
  const int n = x.dim(0), c = x.dim(1);
  const std::int64_t hw = std::int64_t(x.dim(2)) * x.dim(3);
  const std::int64_t m = std::int64_t(n) * hw;
  check(gamma.rank() == 1 && gamma.dim(0) == c && beta.same_shape(gamma),
        "batch_norm: affine shape mismatch");
  check(running_mean.dim(0) == c && running_var.dim(0) == c,
        "batch_norm: running stats shape mismatch");
  check(!train || n >= 1, "batch_norm: train mode needs at least one sample");
  TensorT<T> out(x.shape);
  TensorT<T> mean({c}), istd({c});
  for (int ci = 0; ci < c; ++ci) {
    T mu, is;
    if (train) {
      double s = 0;
      for (int ni = 0; ni < n; ++ni) {
        const T* xs = x.ptr() + (std::int64_t(ni) * c + ci) * hw;
        for (std::int64_t i = 0; i < hw; ++i) s += xs[i];
      }
      const double mud = s / double(m);
      double v = 0;
      for (int ni = 0; ni < n; ++ni) {
        const T* xs = x.ptr() + (std::int64_t(ni) * c + ci) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          const double dxi = xs[i] - mud;
          v += dxi * dxi;
        }
      }
      const double var = v / double(m);
      mu = T(mud);
      is = T(1.0 / std::sqrt(var + double(eps)));
      running_mean.data[ci] = (T(1) - momentum) * running_mean.data[ci] + momentum * mu;
      running_var.data[ci] = (T(1) - momentum) * running_var.data[ci] + momentum * T(var);
    } else {
      mu = running_mean.data[ci];
      is = T(1.0 / std::sqrt(double(running_var.data[ci]) + double(eps)));
    }
    mean.data[ci] = mu;
    istd.data[ci] = is;
    const T g = gamma.data[ci], bb = beta.data[ci];
    for (int ni = 0; ni < n; ++ni) {
      const T* xs = x.ptr() + (std::int64_t(ni) * c + ci) * hw;
      T* os = out.ptr() + (std::int64_t(ni) * c + ci) * hw;
      for (std::int64_t i = 0; i < hw; ++i) os[i] = (xs[i] - mu) * is * g + bb;
    }
  }
  if (saved_mean) *saved_mean = std::move(mean);
  if (saved_istd) *saved_istd = std::move(istd);
  return out;
}

template <typename T>
void batch_norm_backward(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& saved_mean,
                         const TensorT<T>& saved_istd, bool train, const TensorT<T>& gout,
                         TensorT<T>* gx, TensorT<T>* ggamma, TensorT<T>* gbeta) {
  const int n = x.dim(0), c = x.dim(1);
  const std::int64_t hw = std::int64_t(x.dim(2)) * x.dim(3);
  const std::int64_t m = std::int64_t(n) * hw;
  if (gx) *gx = TensorT<T>(x.shape);
  if (ggamma) *ggamma = TensorT<T>({c});
  if (gbeta) *gbeta = TensorT<T>({c});
  for (int ci = 0; ci < c; ++ci) {
    const T mu = saved_mean.data[ci], is = saved_istd.data[ci], g = gamma.data[ci];
    double sum_g = 0, sum_gx = 0;
    for (int ni = 0; ni < n; ++ni) {
      const T* xs = x.ptr() + (std::int64_t(ni) * c + ci) * hw;
      const T* gs = gout.ptr() + (std::int64_t(ni) * c + ci) * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        const double xh = (xs[i] - mu) * is;
        sum_g += gs[i];
        sum_gx += gs[i] * xh;
      }
    }
    if (ggamma) ggamma->data[ci] = T(sum_gx);
    if (gbeta) gbeta->data[ci] = T(sum_g);
    if (!gx) continue;
    const double mg = sum_g / double(m), mgx = sum_gx / double(m);
    for (int ni = 0; ni < n; ++ni) {
      const T* xs = x.ptr() + (std::int64_t(ni) * c + ci) * hw;
      const T* gs = gout.ptr() + (std::int64_t(ni) * c + ci) * hw;
      T* os = gx->ptr() + (std::int64_t(ni) * c + ci) * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        const double xh = (xs[i] - mu) * is;
        // Eval mode treats the normalization statistics as constants.
        const double inner = train ? (gs[i] - mg - xh * mgx) : double(gs[i]);
        os[i] = T(double(g) * double(is) * inner);
      }
    }
  }
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope) {
  check(slope >= T(0) && slope < T(1), "leaky_relu: slope must be in [0,1)");
  TensorT<T> out(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    out.data[i] = x.data[i] >= T(0) ? x.data[i] : slope * x.data[i];
  return out;
}

template <typename T>
TensorT<T> tanh_op(const TensorT<T>& x) {
  TensorT<T> out(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) out.data[i] = std::tanh(x.data[i]);
  return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  TensorT<T> out(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const T v = x.data[i];
    out.data[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                            : T(1) - T(1) / (T(1) + std::exp(v));
  }
  return out;
}

template <typename T>
TensorT<T> log_op(const TensorT<T>& x) {
  TensorT<T> out(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    check(x.data[i] > T(0), "log: input must be strictly positive");
    out.data[i] = std::log(x.data[i]);
  }
  return out;
}

namespace {
template <typename T, typename F>
TensorT<T> zip(const TensorT<T>& a, const TensorT<T>& b, F f, const char* name) {
  check(a.same_shape(b), std::string(name) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
  TensorT<T> out(a.shape);
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data[i] = f(a.data[i], b.data[i]);
  return out;
}
}  // namespace

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return zip(a, b, [](T x, T y) { return x + y; }, "add");
}
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return zip(a, b, [](T x, T y) { return x - y; }, "sub");
}
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return zip(a, b, [](T x, T y) { return x * y; }, "mul");
}
template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T c) {
  TensorT<T> out(a.shape);
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] + c;
  return out;
}
template <typename T>
TensorT<T> mul_scalar(const TensorT<T>& a, T c) {
  TensorT<T> out(a.shape);
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] * c;
  return out;
}

template <typename T>
TensorT<T> concat(const std::vector<const TensorT<T>*>& parts, int axis) {
  check(!parts.empty(), "concat: no inputs");
  const Shape& s0 = parts[0]->shape;
  check(axis >= 0 && axis < int(s0.size()), "concat: axis out of range");
  Shape os = s0;
  os[axis] = 0;
  for (const auto* p : parts) {
    check(int(p->shape.size()) == int(s0.size()), "concat: rank mismatch");
    for (int i = 0; i < int(s0.size()); ++i)
      if (i != axis)
        check(p->shape[i] == s0[i], "concat: shape mismatch on non-concat axis");
    os[axis] += p->shape[axis];
  }
  TensorT<T> out(os);
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (int i = axis + 1; i < int(s0.size()); ++i) inner *= s0[i];
  std::int64_t off = 0;
  for (const auto* p : parts) {
    const std::int64_t rows = p->shape[axis] * inner;
    for (std::int64_t o = 0; o < outer; ++o)
      std::memcpy(out.ptr() + (o * os[axis] * inner + off), p->ptr() + o * rows,
                  std::size_t(rows) * sizeof(T));
    off += rows;
  }
  return out;
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x) {
  double s = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) s += x.data[i];
  return TensorT<T>::scalar(T(s / double(x.numel())));
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x) {
  double s = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) s += x.data[i];
  return TensorT<T>::scalar(T(s));
}

template <typename T>
TensorT<T> row_sum(const TensorT<T>& x) {
  check(x.rank() == 2, "row_sum: input must be rank 2");
  const int n = x.dim(0), f = x.dim(1);
  TensorT<T> out({n});
  for (int i = 0; i < n; ++i) {
    double s = 0;
    const T* r = x.ptr() + std::int64_t(i) * f;
    for (int j = 0; j < f; ++j) s += r[j];
    out.data[i] = T(s);
  }
  return out;
}

template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  check(x.rank() == 2 && w.rank() == 2, "linear: inputs must be rank 2");
  check(x.dim(1) == w.dim(1), "linear: feature dim mismatch");
  check(b.rank() == 1 && b.dim(0) == w.dim(0), "linear: bias shape mismatch");
  const int n = x.dim(0), f = x.dim(1), o = w.dim(0);
  TensorT<T> out({n, o});
  gemm_abt(x.ptr(), w.ptr(), out.ptr(), n, f, o, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) out.data[std::int64_t(i) * o + j] += b.data[j];
  return out;
}

template <typename T>
void linear_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gout,
                     TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb) {
  const int n = x.dim(0), f = x.dim(1), o = w.dim(0);
  if (gx) {
    *gx = TensorT<T>(x.shape);
    gemm(gout.ptr(), w.ptr(), gx->ptr(), n, o, f, false);
  }
  if (gw) {
    *gw = TensorT<T>(w.shape);
    for (int j = 0; j < o; ++j)
      for (int t = 0; t < f; ++t) {
        double acc = 0;
        for (int i = 0; i < n; ++i)
          acc += double(gout.data[std::int64_t(i) * o + j]) * double(x.data[std::int64_t(i) * f + t]);
        gw->data[std::int64_t(j) * f + t] = T(acc);
      }
  }
  if (gb) {
    *gb = TensorT<T>({o});
    for (int j = 0; j < o; ++j) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += gout.data[std::int64_t(i) * o + j];
      gb->data[j] = T(acc);
    }
  }
}

template <typename T>
TensorT<T> global_pool(const TensorT<T>& x) {
  check(x.rank() == 3 || x.rank() == 4, "global_pool: input must be rank 3 or 4");
  const bool batched = x.rank() == 4;
  const int n = batched ? x.dim(0) : 1;
  const int c = batched ? x.dim(1) : x.dim(0);
  const std::int64_t hw = batched ? std::int64_t(x.dim(2)) * x.dim(3)
                                  : std::int64_t(x.dim(1)) * x.dim(2);
  TensorT<T> out(batched ? Shape{n, c} : Shape{c});
  for (int i = 0; i < n * c; ++i) {
    double s = 0;
    const T* p = x.ptr() + std::int64_t(i) * hw;
    for (std::int64_t j = 0; j < hw; ++j) s += p[j];
    out.data[i] = T(s / double(hw));
  }
  return out;
}

template <typename T>
TensorT<T> flatten(const TensorT<T>& x) {
  check(x.rank() >= 2, "flatten: input must have rank >= 2");
  std::int64_t rest = x.numel() / x.dim(0);
  TensorT<T> out({x.dim(0), int(rest)});
  out.data = x.data;
  return out;
}

template <typename T>
TensorT<T> l2_normalize_rows(const TensorT<T>& x, T eps, TensorT<T>* saved_norm) {
  check(x.rank() == 2, "l2_normalize_rows: input must be rank 2");
  const int n = x.dim(0), f = x.dim(1);
  TensorT<T> out(x.shape), norm({n});
  for (int i = 0; i < n; ++i) {
    const T* r = x.ptr() + std::int64_t(i) * f;
    double s = 0;
    for (int j = 0; j < f; ++j) s += double(r[j]) * double(r[j]);
    const T rn = T(std::sqrt(s + double(eps)));
    norm.data[i] = rn;
    T* or_ = out.ptr() + std::int64_t(i) * f;
    for (int j = 0; j < f; ++j) or_[j] = r[j] / rn;
  }
  if (saved_norm) *saved_norm = std::move(norm);
  return out;
}

template <typename T>
TensorT<T> l2_normalize_rows_backward(const TensorT<T>& x, const TensorT<T>& saved_norm,
                                      const TensorT<T>& gout) {
  const int n = x.dim(0), f = x.dim(1);
  TensorT<T> gx(x.shape);
  for (int i = 0; i < n; ++i) {
    const T* r = x.ptr() + std::int64_t(i) * f;
    const T* g = gout.ptr() + std::int64_t(i) * f;
    T* o = gx.ptr() + std::int64_t(i) * f;
    const double rn = saved_norm.data[i];
    double dot = 0;
    for (int j = 0; j < f; ++j) dot += double(g[j]) * double(r[j]);
    const double r3 = rn * rn * rn;
    for (int j = 0; j < f; ++j) o[j] = T(double(g[j]) / rn - double(r[j]) * dot / r3);
  }
  return gx;
}

template <typename T>
TensorT<T> bce_with_logits(const TensorT<T>& z, const TensorT<T>& y) {
  check(z.same_shape(y), "bce_with_logits: shape mismatch");
  double s = 0;
  for (std::int64_t i = 0; i < z.numel(); ++i) {
    const double zi = z.data[i], yi = y.data[i];
    s += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
  }
  return TensorT<T>::scalar(T(s / double(z.numel())));
}

template <typename T>
TensorT<T> bce_with_logits_backward(const TensorT<T>& z, const TensorT<T>& y, T gout) {
  TensorT<T> gz(z.shape);
  const double scale = double(gout) / double(z.numel());
  for (std::int64_t i = 0; i < z.numel(); ++i) {
    const double zi = z.data[i];
    const double sig = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : 1.0 - 1.0 / (1.0 + std::exp(zi));
    gz.data[i] = T((sig - double(y.data[i])) * scale);
  }
  return gz;
}

#define PAGN_INSTANTIATE(T)                                                                        \
  template void gemm<T>(const T*, const T*, T*, int, int, int, bool);                              \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, int,     \
                                int);                                                             \
  template void conv2d_backward<T>(const TensorT<T>&, const TensorT<T>&, int, int,                \
                                   const TensorT<T>&, TensorT<T>*, TensorT<T>*, TensorT<T>*);     \
  template TensorT<T> conv_transpose2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,\
                                          int, int, int);                                         \
  template void conv_transpose2d_backward<T>(const TensorT<T>&, const TensorT<T>&, int, int, int, \
                                             const TensorT<T>&, TensorT<T>*, TensorT<T>*,         \
                                             TensorT<T>*);                                        \
  template TensorT<T> instance_norm<T>(const TensorT<T>&, T, TensorT<T>*, TensorT<T>*);           \
  template TensorT<T> instance_norm_backward<T>(const TensorT<T>&, const TensorT<T>&,             \
                                                const TensorT<T>&, const TensorT<T>&);            \
  template TensorT<T> batch_norm<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,      \
                                    TensorT<T>&, TensorT<T>&, bool, T, T, TensorT<T>*,            \
                                    TensorT<T>*);                                                 \
  template void batch_norm_backward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,   \
                                       const TensorT<T>&, bool, const TensorT<T>&, TensorT<T>*,   \
                                       TensorT<T>*, TensorT<T>*);                                 \
  template TensorT<T> relu<T>(const TensorT<T>&);                                                 \
  template TensorT<T> leaky_relu<T>(const TensorT<T>&, T);                                        \
  template TensorT<T> tanh_op<T>(const TensorT<T>&);                                              \
  template TensorT<T> sigmoid<T>(const TensorT<T>&);                                              \
  template TensorT<T> log_op<T>(const TensorT<T>&);                                               \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> add_scalar<T>(const TensorT<T>&, T);                                        \
  template TensorT<T> mul_scalar<T>(const TensorT<T>&, T);                                        \
  template TensorT<T> concat<T>(const std::vector<const TensorT<T>*>&, int);                      \
  template TensorT<T> mean_all<T>(const TensorT<T>&);                                             \
  template TensorT<T> sum_all<T>(const TensorT<T>&);                                              \
  template TensorT<T> row_sum<T>(const TensorT<T>&);                                              \
  template TensorT<T> linear<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);         \
  template void linear_backward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,       \
                                   TensorT<T>*, TensorT<T>*, TensorT<T>*);                        \
  template TensorT<T> global_pool<T>(const TensorT<T>&);                                          \
  template TensorT<T> flatten<T>(const TensorT<T>&);                                              \
  template TensorT<T> l2_normalize_rows<T>(const TensorT<T>&, T, TensorT<T>*);                    \
  template TensorT<T> l2_normalize_rows_backward<T>(const TensorT<T>&, const TensorT<T>&,         \
                                                    const TensorT<T>&);                           \
  template TensorT<T> bce_with_logits<T>(const TensorT<T>&, const TensorT<T>&);                   \
  template TensorT<T> bce_with_logits_backward<T>(const TensorT<T>&, const TensorT<T>&, T);

PAGN_INSTANTIATE(float)
PAGN_INSTANTIATE(double)
#undef PAGN_INSTANTIATE

}  // namespace pagn::ops
