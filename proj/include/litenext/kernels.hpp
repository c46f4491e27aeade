#pragma once

// Dense CPU kernels for the tensor engine. Every kernel exists in two
// flavors: litenext::kernels (OpenMP-parallel over disjoint output slices)
// and litenext::kernels::serial (single-threaded reference used by the
// parity tests and the benchmark). Both loop over the same per-slice
// helpers in the same order, so results are bitwise identical regardless
// of thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace litenext::kernels {

namespace detail {

// Range of output indices o with 0 <= o*stride - pad + k < limit. Used to
// hoist the tap-validity checks out of the innermost loops; the surviving
// iterations are exactly the ones the naive bounds-checked loop keeps, in
// the same order, so accumulation order (and therefore every bit of the
// result) is unchanged.
inline void tap_range(int pad, int k, int limit, int stride, int out_limit,
                      int* o0, int* o1) {
  const int lo = pad - k;              // o*stride >= lo
  const int hi = limit - 1 + pad - k;  // o*stride <= hi
  *o0 = lo <= 0 ? 0 : (lo + stride - 1) / stride;
  *o1 = hi < 0 ? 0 : std::min(out_limit, hi / stride + 1);
  if (*o1 < *o0) *o1 = *o0;
}

// One (b, co) output plane of a dense cross-correlation. Written as a sum
// of shifted row AXPYs: each output pixel still accumulates its taps in
// (ci, kh, kw) order starting from the bias, matching the naive loop nest
// bit for bit while keeping the inner loop branch-free and vectorizable.
template <typename T>
inline void conv2d_plane(const T* x, const T* w, T bias, T* y, int Cin,
                         int H, int W, int K, int stride, int pad, int OH,
                         int OW) {
  for (int p = 0; p < OH * OW; ++p) y[p] = bias;
  for (int ci = 0; ci < Cin; ++ci) {
    const T* xc = x + (int64_t)ci * H * W;
    const T* wc = w + (int64_t)ci * K * K;
    for (int kh = 0; kh < K; ++kh) {
      for (int kw = 0; kw < K; ++kw) {
        const T wv = wc[kh * K + kw];
        int ow0, ow1;
        tap_range(pad, kw, W, stride, OW, &ow0, &ow1);
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          const T* xrow = xc + (int64_t)ih * W - pad + kw;
          T* yrow = y + (int64_t)oh * OW;
          if (stride == 1) {
            for (int ow = ow0; ow < ow1; ++ow) yrow[ow] += xrow[ow] * wv;
          } else {
            for (int ow = ow0; ow < ow1; ++ow)
              yrow[ow] += xrow[(int64_t)ow * stride] * wv;
          }
        }
      }
    }
  }
}

// Gradient w.r.t. one (b, ci) input plane (accumulating). Scattered from
// the output rows into a zeroed scratch plane so each input pixel gathers
// its taps in (co, kh, kw) order, then added onto gx in one pass -- the
// same order of floating-point operations as the naive gather loop.
template <typename T>
inline void conv2d_bwd_input_plane(const T* w_ci, const T* gy_b, T* gx,
                                   int Cout, int Cin, int H, int W, int K,
                                   int stride, int pad, int OH, int OW) {
  std::vector<T> scratch((size_t)H * W, T(0));
  T* sx = scratch.data();
  for (int co = 0; co < Cout; ++co) {
    const T* gyc = gy_b + (int64_t)co * OH * OW;
    const T* wc = w_ci + (int64_t)co * Cin * K * K;
    for (int kh = 0; kh < K; ++kh) {
      for (int kw = 0; kw < K; ++kw) {
        const T wv = wc[kh * K + kw];
        int ow0, ow1;
        tap_range(pad, kw, W, stride, OW, &ow0, &ow1);
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          T* srow = sx + (int64_t)ih * W - pad + kw;
          const T* gyrow = gyc + (int64_t)oh * OW;
          if (stride == 1) {
            for (int ow = ow0; ow < ow1; ++ow) srow[ow] += wv * gyrow[ow];
          } else {
            for (int ow = ow0; ow < ow1; ++ow)
              srow[(int64_t)ow * stride] += wv * gyrow[ow];
          }
        }
      }
    }
  }
  for (int p = 0; p < H * W; ++p) gx[p] += sx[p];
}

// Lane-strided dot product. The sum is split across a fixed number of
// lanes (vectorizable) and folded in lane order, so the result depends
// only on the inputs and n -- deterministic, and shared by the serial and
// OpenMP kernel flavors, but not bit-identical to a strictly sequential
// sum. Gradients computed with it are validated against finite
// differences, not frozen bit patterns.
template <typename T>
inline T dot_rows(const T* a, const T* b, int n) {
  constexpr int L = 16;
  T lanes[L] = {};
  int i = 0;
  for (; i + L <= n; i += L)
    for (int l = 0; l < L; ++l) lanes[l] += a[i + l] * b[i + l];
  T acc = T(0);
  for (int l = 0; l < L; ++l) acc += lanes[l];
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Gradient w.r.t. one output-channel slice of the weights (accumulating).
template <typename T>
inline void conv2d_bwd_weight_slice(const T* x, const T* gy, T* gw_co,
                                    T* gb_co, int B, int Cin, int H, int W,
                                    int Cout, int co, int K, int stride,
                                    int pad, int OH, int OW) {
  T gb = T(0);
  for (int b = 0; b < B; ++b) {
    const T* gyc = gy + ((int64_t)b * Cout + co) * OH * OW;
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) gb += gyc[oh * OW + ow];
  }
  *gb_co += gb;
  for (int ci = 0; ci < Cin; ++ci) {
    for (int kh = 0; kh < K; ++kh) {
      int oh0, oh1;
      tap_range(pad, kh, H, stride, OH, &oh0, &oh1);
      for (int kw = 0; kw < K; ++kw) {
        int ow0, ow1;
        tap_range(pad, kw, W, stride, OW, &ow0, &ow1);
        T acc = T(0);
        for (int b = 0; b < B; ++b) {
          const T* xc = x + ((int64_t)b * Cin + ci) * H * W;
          const T* gyc = gy + ((int64_t)b * Cout + co) * OH * OW;
          for (int oh = oh0; oh < oh1; ++oh) {
            const int ih = oh * stride - pad + kh;
            const T* xrow = xc + (int64_t)ih * W - pad + kw;
            const T* gyrow = gyc + (int64_t)oh * OW;
            if (stride == 1) {
              acc += dot_rows(xrow + ow0, gyrow + ow0, ow1 - ow0);
            } else {
              for (int ow = ow0; ow < ow1; ++ow)
                acc += xrow[(int64_t)ow * stride] * gyrow[ow];
            }
          }
        }
        gw_co[(ci * K + kh) * K + kw] += acc;
      }
    }
  }
}

// Depthwise: one (b, c) plane, spatial size preserved (pad = (K-1)/2).
template <typename T>
inline void dwconv2d_plane(const T* xc, const T* wc, T bias, T* yc, int H,
                           int W, int K, int pad) {
  for (int p = 0; p < H * W; ++p) yc[p] = bias;
  for (int kh = 0; kh < K; ++kh) {
    for (int kw = 0; kw < K; ++kw) {
      const T wv = wc[kh * K + kw];
      const int ow0 = std::max(0, pad - kw);
      const int ow1 = std::min(W, W + pad - kw);
      for (int oh = 0; oh < H; ++oh) {
        const int ih = oh - pad + kh;
        if (ih < 0 || ih >= H) continue;
        const T* xrow = xc + (int64_t)ih * W - pad + kw;
        T* yrow = yc + (int64_t)oh * W;
        for (int ow = ow0; ow < ow1; ++ow) yrow[ow] += xrow[ow] * wv;
      }
    }
  }
}

template <typename T>
inline void dwconv2d_bwd_input_plane(const T* wc, const T* gyc, T* gxc,
                                     int H, int W, int K, int pad) {
  std::vector<T> scratch((size_t)H * W, T(0));
  T* sx = scratch.data();
  for (int kh = 0; kh < K; ++kh) {
    for (int kw = 0; kw < K; ++kw) {
      const T wv = wc[kh * K + kw];
      const int ow0 = std::max(0, pad - kw);
      const int ow1 = std::min(W, W + pad - kw);
      for (int oh = 0; oh < H; ++oh) {
        const int ih = oh - pad + kh;
        if (ih < 0 || ih >= H) continue;
        T* srow = sx + (int64_t)ih * W - pad + kw;
        const T* gyrow = gyc + (int64_t)oh * W;
        for (int ow = ow0; ow < ow1; ++ow) srow[ow] += wv * gyrow[ow];
      }
    }
  }
  for (int p = 0; p < H * W; ++p) gxc[p] += sx[p];
}

template <typename T>
inline void dwconv2d_bwd_weight_channel(const T* x, const T* gy, T* gw_c,
                                        T* gb_c, int B, int C, int c, int H,
                                        int W, int K, int pad) {
  T gb = T(0);
  for (int b = 0; b < B; ++b) {
    const T* gyc = gy + ((int64_t)b * C + c) * H * W;
    for (int p = 0; p < H * W; ++p) gb += gyc[p];
  }
  *gb_c += gb;
  for (int kh = 0; kh < K; ++kh) {
    const int oh0 = std::max(0, pad - kh);
    const int oh1 = std::min(H, H + pad - kh);
    for (int kw = 0; kw < K; ++kw) {
      const int ow0 = std::max(0, pad - kw);
      const int ow1 = std::min(W, W + pad - kw);
      T acc = T(0);
      for (int b = 0; b < B; ++b) {
        const T* xc = x + ((int64_t)b * C + c) * H * W;
        const T* gyc = gy + ((int64_t)b * C + c) * H * W;
        for (int oh = oh0; oh < oh1; ++oh) {
          const int ih = oh - pad + kh;
          const T* xrow = xc + (int64_t)ih * W - pad + kw;
          const T* gyrow = gyc + (int64_t)oh * W;
          acc += dot_rows(xrow + ow0, gyrow + ow0, ow1 - ow0);
        }
      }
      gw_c[kh * K + kw] += acc;
    }
  }
}

// 2x2 max pool, one (b, c) plane; argmax is the flat index within the
// input plane, first-found in row-major window order on ties.
template <typename T>
inline void maxpool2x2_plane(const T* xc, T* yc, int* amc, int H, int W) {
  const int OH = H / 2, OW = W / 2;
  for (int oh = 0; oh < OH; ++oh) {
    for (int ow = 0; ow < OW; ++ow) {
      int best = (2 * oh) * W + 2 * ow;
      T bv = xc[best];
      const int cand[3] = {(2 * oh) * W + 2 * ow + 1, (2 * oh + 1) * W + 2 * ow,
                           (2 * oh + 1) * W + 2 * ow + 1};
      for (int idx : cand) {
        if (xc[idx] > bv) {
          bv = xc[idx];
          best = idx;
        }
      }
      yc[oh * OW + ow] = bv;
      amc[oh * OW + ow] = best;
    }
  }
}

// Bilinear resize (half-pixel centers), one (b, c) plane.
template <typename T>
inline void resize_bilinear_plane(const T* xc, T* yc, int H, int W, int OH,
                                  int OW) {
  const T sh = T(H) / T(OH), sw = T(W) / T(OW);
  for (int oh = 0; oh < OH; ++oh) {
    T fy = (T(oh) + T(0.5)) * sh - T(0.5);
    if (fy < T(0)) fy = T(0);
    int y0 = (int)fy;
    if (y0 > H - 1) y0 = H - 1;
    int y1 = y0 + 1 < H ? y0 + 1 : H - 1;
    const T wy = fy - T(y0);
    for (int ow = 0; ow < OW; ++ow) {
      T fx = (T(ow) + T(0.5)) * sw - T(0.5);
      if (fx < T(0)) fx = T(0);
      int x0 = (int)fx;
      if (x0 > W - 1) x0 = W - 1;
      int x1 = x0 + 1 < W ? x0 + 1 : W - 1;
      const T wx = fx - T(x0);
      const T top = xc[y0 * W + x0] * (T(1) - wx) + xc[y0 * W + x1] * wx;
      const T bot = xc[y1 * W + x0] * (T(1) - wx) + xc[y1 * W + x1] * wx;
      yc[oh * OW + ow] = top * (T(1) - wy) + bot * wy;
    }
  }
}

// Scatter of the resize gradient back to one input plane (accumulating).
template <typename T>
inline void resize_bilinear_bwd_plane(const T* gyc, T* gxc, int H, int W,
                                      int OH, int OW) {
  const T sh = T(H) / T(OH), sw = T(W) / T(OW);
  for (int oh = 0; oh < OH; ++oh) {
    T fy = (T(oh) + T(0.5)) * sh - T(0.5);
    if (fy < T(0)) fy = T(0);
    int y0 = (int)fy;
    if (y0 > H - 1) y0 = H - 1;
    int y1 = y0 + 1 < H ? y0 + 1 : H - 1;
    const T wy = fy - T(y0);
    for (int ow = 0; ow < OW; ++ow) {
      T fx = (T(ow) + T(0.5)) * sw - T(0.5);
      if (fx < T(0)) fx = T(0);
      int x0 = (int)fx;
      if (x0 > W - 1) x0 = W - 1;
      int x1 = x0 + 1 < W ? x0 + 1 : W - 1;
      const T wx = fx - T(x0);
      const T g = gyc[oh * OW + ow];
      gxc[y0 * W + x0] += g * (T(1) - wx) * (T(1) - wy);
      gxc[y0 * W + x1] += g * wx * (T(1) - wy);
      gxc[y1 * W + x0] += g * (T(1) - wx) * wy;
      gxc[y1 * W + x1] += g * wx * wy;
    }
  }
}

// Channel LayerNorm over one batch element: normalize the C-vector at each
// spatial position. mean/rstd are stored per (b, h, w) for the backward.
template <typename T>
inline void layer_norm_channels_batch(const T* xb, const T* gamma,
                                      const T* beta, T eps, T* yb, T* meanb,
                                      T* rstdb, int C, int HW) {
  for (int p = 0; p < HW; ++p) {
    T mu = T(0);
    for (int c = 0; c < C; ++c) mu += xb[(int64_t)c * HW + p];
    mu /= T(C);
    T var = T(0);
    for (int c = 0; c < C; ++c) {
      const T d = xb[(int64_t)c * HW + p] - mu;
      var += d * d;
    }
    var /= T(C);
    const T rstd = T(1) / std::sqrt(var + eps);
    meanb[p] = mu;
    rstdb[p] = rstd;
    for (int c = 0; c < C; ++c) {
      const T xhat = (xb[(int64_t)c * HW + p] - mu) * rstd;
      yb[(int64_t)c * HW + p] = gamma[c] * xhat + beta[c];
    }
  }
}

template <typename T>
inline void layer_norm_channels_bwd_batch(const T* xb, const T* gamma,
                                          const T* meanb, const T* rstdb,
                                          const T* gyb, T* gxb, int C,
                                          int HW) {
  for (int p = 0; p < HW; ++p) {
    const T mu = meanb[p], rstd = rstdb[p];
    T s1 = T(0), s2 = T(0);
    for (int c = 0; c < C; ++c) {
      const T xhat = (xb[(int64_t)c * HW + p] - mu) * rstd;
      const T gyg = gyb[(int64_t)c * HW + p] * gamma[c];
      s1 += gyg;
      s2 += gyg * xhat;
    }
    s1 /= T(C);
    s2 /= T(C);
    for (int c = 0; c < C; ++c) {
      const T xhat = (xb[(int64_t)c * HW + p] - mu) * rstd;
      const T gyg = gyb[(int64_t)c * HW + p] * gamma[c];
      gxb[(int64_t)c * HW + p] += rstd * (gyg - s1 - xhat * s2);
    }
  }
}

template <typename T>
inline T gelu_scalar(T x) {
  return x * T(0.5) * std::erfc(-x * T(M_SQRT1_2));
}

template <typename T>
inline T gelu_grad_scalar(T x) {
  const T cdf = T(0.5) * std::erfc(-x * T(M_SQRT1_2));
  const T pdf = std::exp(-T(0.5) * x * x) * T(0.3989422804014326779);
  return cdf + x * pdf;
}

template <typename T>
inline T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------
// Serial reference kernels.
// ---------------------------------------------------------------------
namespace serial {

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, int B,
                    int Cin, int H, int W, int Cout, int K, int stride,
                    int pad, int OH, int OW) {
  for (int bc = 0; bc < B * Cout; ++bc) {
    const int b = bc / Cout, co = bc % Cout;
    detail::conv2d_plane(x + (int64_t)b * Cin * H * W,
                         w + (int64_t)co * Cin * K * K, bias[co],
                         y + (int64_t)bc * OH * OW, Cin, H, W, K, stride,
                         pad, OH, OW);
  }
}

template <typename T>
void conv2d_backward_input(const T* w, const T* gy, T* gx, int B, int Cin,
                           int H, int W, int Cout, int K, int stride,
                           int pad, int OH, int OW) {
  for (int bc = 0; bc < B * Cin; ++bc) {
    const int b = bc / Cin, ci = bc % Cin;
    detail::conv2d_bwd_input_plane(w + (int64_t)ci * K * K,
                                   gy + (int64_t)b * Cout * OH * OW,
                                   gx + (int64_t)bc * H * W, Cout, Cin, H,
                                   W, K, stride, pad, OH, OW);
  }
}

template <typename T>
void conv2d_backward_weight(const T* x, const T* gy, T* gw, T* gb, int B,
                            int Cin, int H, int W, int Cout, int K,
                            int stride, int pad, int OH, int OW) {
  for (int co = 0; co < Cout; ++co)
    detail::conv2d_bwd_weight_slice(x, gy, gw + (int64_t)co * Cin * K * K,
                                    gb + co, B, Cin, H, W, Cout, co, K,
                                    stride, pad, OH, OW);
}

template <typename T>
void dwconv2d_forward(const T* x, const T* w, const T* bias, T* y, int B,
                      int C, int H, int W, int K, int pad) {
  for (int bc = 0; bc < B * C; ++bc) {
    const int c = bc % C;
    detail::dwconv2d_plane(x + (int64_t)bc * H * W, w + (int64_t)c * K * K,
                           bias[c], y + (int64_t)bc * H * W, H, W, K, pad);
  }
}

template <typename T>
void dwconv2d_backward_input(const T* w, const T* gy, T* gx, int B, int C,
                             int H, int W, int K, int pad) {
  for (int bc = 0; bc < B * C; ++bc) {
    const int c = bc % C;
    detail::dwconv2d_bwd_input_plane(w + (int64_t)c * K * K,
                                     gy + (int64_t)bc * H * W,
                                     gx + (int64_t)bc * H * W, H, W, K, pad);
  }
}

template <typename T>
void dwconv2d_backward_weight(const T* x, const T* gy, T* gw, T* gb, int B,
                              int C, int H, int W, int K, int pad) {
  for (int c = 0; c < C; ++c)
    detail::dwconv2d_bwd_weight_channel(x, gy, gw + (int64_t)c * K * K,
                                        gb + c, B, C, c, H, W, K, pad);
}

template <typename T>
void maxpool2x2_forward(const T* x, T* y, int* argmax, int B, int C, int H,
                        int W) {
  const int OH = H / 2, OW = W / 2;
  for (int bc = 0; bc < B * C; ++bc)
    detail::maxpool2x2_plane(x + (int64_t)bc * H * W,
                             y + (int64_t)bc * OH * OW,
                             argmax + (int64_t)bc * OH * OW, H, W);
}

template <typename T>
void resize_bilinear_forward(const T* x, T* y, int B, int C, int H, int W,
                             int OH, int OW) {
  for (int bc = 0; bc < B * C; ++bc)
    detail::resize_bilinear_plane(x + (int64_t)bc * H * W,
                                  y + (int64_t)bc * OH * OW, H, W, OH, OW);
}

template <typename T>
void layer_norm_channels_forward(const T* x, const T* gamma, const T* beta,
                                 T eps, T* y, T* mean, T* rstd, int B,
                                 int C, int HW) {
  for (int b = 0; b < B; ++b)
    detail::layer_norm_channels_batch(x + (int64_t)b * C * HW, gamma, beta,
                                      eps, y + (int64_t)b * C * HW,
                                      mean + (int64_t)b * HW,
                                      rstd + (int64_t)b * HW, C, HW);
}

template <typename T>
void gelu_forward(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

template <typename T>
void sigmoid_forward(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = detail::sigmoid_scalar(x[i]);
}

template <typename T>
void linear_forward(const T* x, const T* w, const T* bias, T* y, int B,
                    int N, int M) {
  for (int b = 0; b < B; ++b) {
    for (int m = 0; m < M; ++m) {
      T acc = bias[m];
      for (int n = 0; n < N; ++n) acc += x[(int64_t)b * N + n] * w[(int64_t)m * N + n];
      y[(int64_t)b * M + m] = acc;
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------
// OpenMP kernels. Parallel loops run over disjoint output slices; each
// slice is computed by the same helper as the serial reference, so the
// output is bitwise identical at any thread count. When the runtime has a
// single thread the heavy kernels call the serial loops directly, skipping
// the fork/join machinery.
// ---------------------------------------------------------------------

inline bool single_threaded() {
#ifdef _OPENMP
  return omp_get_max_threads() == 1;
#else
  return true;
#endif
}

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, int B,
                    int Cin, int H, int W, int Cout, int K, int stride,
                    int pad, int OH, int OW) {
  if (single_threaded())
    return serial::conv2d_forward(x, w, bias, y, B, Cin, H, W, Cout, K,
                                  stride, pad, OH, OW);
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * Cout; ++bc) {
    const int b = bc / Cout, co = bc % Cout;
    detail::conv2d_plane(x + (int64_t)b * Cin * H * W,
                         w + (int64_t)co * Cin * K * K, bias[co],
                         y + (int64_t)bc * OH * OW, Cin, H, W, K, stride,
                         pad, OH, OW);
  }
}

template <typename T>
void conv2d_backward_input(const T* w, const T* gy, T* gx, int B, int Cin,
                           int H, int W, int Cout, int K, int stride,
                           int pad, int OH, int OW) {
  if (single_threaded())
    return serial::conv2d_backward_input(w, gy, gx, B, Cin, H, W, Cout, K,
                                         stride, pad, OH, OW);
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * Cin; ++bc) {
    const int b = bc / Cin, ci = bc % Cin;
    detail::conv2d_bwd_input_plane(w + (int64_t)ci * K * K,
                                   gy + (int64_t)b * Cout * OH * OW,
                                   gx + (int64_t)bc * H * W, Cout, Cin, H,
                                   W, K, stride, pad, OH, OW);
  }
}

template <typename T>
void conv2d_backward_weight(const T* x, const T* gy, T* gw, T* gb, int B,
                            int Cin, int H, int W, int Cout, int K,
                            int stride, int pad, int OH, int OW) {
  if (single_threaded())
    return serial::conv2d_backward_weight(x, gy, gw, gb, B, Cin, H, W, Cout,
                                          K, stride, pad, OH, OW);
#pragma omp parallel for schedule(static)
  for (int co = 0; co < Cout; ++co)
    detail::conv2d_bwd_weight_slice(x, gy, gw + (int64_t)co * Cin * K * K,
                                    gb + co, B, Cin, H, W, Cout, co, K,
                                    stride, pad, OH, OW);
}

template <typename T>
void dwconv2d_forward(const T* x, const T* w, const T* bias, T* y, int B,
                      int C, int H, int W, int K, int pad) {
  if (single_threaded())
    return serial::dwconv2d_forward(x, w, bias, y, B, C, H, W, K, pad);
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    const int c = bc % C;
    detail::dwconv2d_plane(x + (int64_t)bc * H * W, w + (int64_t)c * K * K,
                           bias[c], y + (int64_t)bc * H * W, H, W, K, pad);
  }
}

template <typename T>
void dwconv2d_backward_input(const T* w, const T* gy, T* gx, int B, int C,
                             int H, int W, int K, int pad) {
  if (single_threaded())
    return serial::dwconv2d_backward_input(w, gy, gx, B, C, H, W, K, pad);
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    const int c = bc % C;
    detail::dwconv2d_bwd_input_plane(w + (int64_t)c * K * K,
                                     gy + (int64_t)bc * H * W,
                                     gx + (int64_t)bc * H * W, H, W, K, pad);
  }
}

template <typename T>
void dwconv2d_backward_weight(const T* x, const T* gy, T* gw, T* gb, int B,
                              int C, int H, int W, int K, int pad) {
  if (single_threaded())
    return serial::dwconv2d_backward_weight(x, gy, gw, gb, B, C, H, W, K,
                                            pad);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c)
    detail::dwconv2d_bwd_weight_channel(x, gy, gw + (int64_t)c * K * K,
                                        gb + c, B, C, c, H, W, K, pad);
}

template <typename T>
void maxpool2x2_forward(const T* x, T* y, int* argmax, int B, int C, int H,
                        int W) {
  const int OH = H / 2, OW = W / 2;
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc)
    detail::maxpool2x2_plane(x + (int64_t)bc * H * W,
                             y + (int64_t)bc * OH * OW,
                             argmax + (int64_t)bc * OH * OW, H, W);
}

template <typename T>
void resize_bilinear_forward(const T* x, T* y, int B, int C, int H, int W,
                             int OH, int OW) {
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc)
    detail::resize_bilinear_plane(x + (int64_t)bc * H * W,
                                  y + (int64_t)bc * OH * OW, H, W, OH, OW);
}

template <typename T>
void resize_bilinear_backward(const T* gy, T* gx, int B, int C, int H,
                              int W, int OH, int OW) {
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc)
    detail::resize_bilinear_bwd_plane(gy + (int64_t)bc * OH * OW,
                                      gx + (int64_t)bc * H * W, H, W, OH,
                                      OW);
}

template <typename T>
void layer_norm_channels_forward(const T* x, const T* gamma, const T* beta,
                                 T eps, T* y, T* mean, T* rstd, int B,
                                 int C, int HW) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b)
    detail::layer_norm_channels_batch(x + (int64_t)b * C * HW, gamma, beta,
                                      eps, y + (int64_t)b * C * HW,
                                      mean + (int64_t)b * HW,
                                      rstd + (int64_t)b * HW, C, HW);
}

template <typename T>
void layer_norm_channels_backward_input(const T* x, const T* gamma,
                                        const T* mean, const T* rstd,
                                        const T* gy, T* gx, int B, int C,
                                        int HW) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b)
    detail::layer_norm_channels_bwd_batch(
        x + (int64_t)b * C * HW, gamma, mean + (int64_t)b * HW,
        rstd + (int64_t)b * HW, gy + (int64_t)b * C * HW,
        gx + (int64_t)b * C * HW, C, HW);
}

template <typename T>
void gelu_forward(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

template <typename T>
void gelu_backward(const T* x, const T* gy, T* gx, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    gx[i] += gy[i] * detail::gelu_grad_scalar(x[i]);
}

template <typename T>
void sigmoid_forward(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = detail::sigmoid_scalar(x[i]);
}

template <typename T>
void sigmoid_backward(const T* y, const T* gy, T* gx, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
}

template <typename T>
void linear_forward(const T* x, const T* w, const T* bias, T* y, int B,
                    int N, int M) {
#pragma omp parallel for schedule(static) collapse(2)
  for (int b = 0; b < B; ++b) {
    for (int m = 0; m < M; ++m) {
      T acc = bias[m];
      for (int n = 0; n < N; ++n)
        acc += x[(int64_t)b * N + n] * w[(int64_t)m * N + n];
      y[(int64_t)b * M + m] = acc;
    }
  }
}

}  // namespace litenext::kernels
