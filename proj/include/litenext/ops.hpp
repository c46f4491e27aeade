#pragma once

// Autodiff ops over Tensor<T>. Forward math runs through the kernels in
// kernels.hpp; backward closures are recorded on the active Tape.

#include <algorithm>
#include <cmath>

#include "litenext/kernels.hpp"
#include "litenext/tensor.hpp"

namespace litenext {

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
  for (int64_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t.data()[i]))
      throw std::runtime_error(std::string(op) +
                               ": non-finite value in output");
  }
#else
  (void)t;
  (void)op;
#endif
}

template <typename T>
void expect_rank(const Tensor<T>& t, int r, const char* op) {
  if (t.rank() != r)
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(r) + ", got " + shape_str(t.shape()));
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int stride = 1, int padding = 0) {
  detail::expect_rank(x, 4, "conv2d input");
  detail::expect_rank(w, 4, "conv2d weight");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (padding < 0) throw ShapeError("conv2d: padding must be >= 0");
  const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), K = w.dim(2);
  if (w.dim(1) != Cin)
    throw ShapeError("conv2d: weight in-channels " + std::to_string(w.dim(1)) +
                     " != input channels " + std::to_string(Cin));
  if (w.dim(3) != K) throw ShapeError("conv2d: non-square kernel");
  if (b.size() != Cout)
    throw ShapeError("conv2d: bias length " + std::to_string(b.size()) +
                     " != out channels " + std::to_string(Cout));
  const int OH = (H + 2 * padding - K) / stride + 1;
  const int OW = (W + 2 * padding - K) / stride + 1;
  if (OH <= 0 || OW <= 0)
    throw ShapeError("conv2d: kernel larger than padded input");

  Tensor<T> y({B, Cout, OH, OW});
  kernels::conv2d_forward(x.data(), w.data(), b.data(), y.data(), B, Cin, H,
                          W, Cout, K, stride, padding, OH, OW);
  detail::check_finite(y, "conv2d");

  if (grad_enabled<T>() &&
      (x.requires_grad() || w.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      if (x.requires_grad()) {
        x.ensure_grad();
        kernels::conv2d_backward_input(w.data(), y.grad(), x.grad(), B, Cin,
                                       H, W, Cout, K, stride, padding, OH,
                                       OW);
      }
      if (w.requires_grad() || b.requires_grad()) {
        w.ensure_grad();
        b.ensure_grad();
        kernels::conv2d_backward_weight(x.data(), y.grad(), w.grad(),
                                        b.grad(), B, Cin, H, W, Cout, K,
                                        stride, padding, OH, OW);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& b, int padding) {
  detail::expect_rank(x, 4, "depthwise_conv2d input");
  detail::expect_rank(w, 4, "depthwise_conv2d weight");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int K = w.dim(2);
  if (K % 2 == 0)
    throw ShapeError("depthwise_conv2d: kernel size must be odd, got " +
                     std::to_string(K));
  if (w.dim(0) != C || w.dim(1) != 1)
    throw ShapeError("depthwise_conv2d: weight must be [" +
                     std::to_string(C) + ",1,k,k], got " +
                     detail::shape_str(w.shape()));
  if (padding != (K - 1) / 2)
    throw ShapeError("depthwise_conv2d: padding must be (k-1)/2 = " +
                     std::to_string((K - 1) / 2));
  if (b.size() != C)
    throw ShapeError("depthwise_conv2d: bias length != channels");

  Tensor<T> y({B, C, H, W});
  kernels::dwconv2d_forward(x.data(), w.data(), b.data(), y.data(), B, C, H,
                            W, K, padding);
  detail::check_finite(y, "depthwise_conv2d");

  if (grad_enabled<T>() &&
      (x.requires_grad() || w.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      if (x.requires_grad()) {
        x.ensure_grad();
        kernels::dwconv2d_backward_input(w.data(), y.grad(), x.grad(), B, C,
                                         H, W, K, padding);
      }
      if (w.requires_grad() || b.requires_grad()) {
        w.ensure_grad();
        b.ensure_grad();
        kernels::dwconv2d_backward_weight(x.data(), y.grad(), w.grad(),
                                          b.grad(), B, C, H, W, K, padding);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& x) {
  detail::expect_rank(x, 4, "maxpool2x2");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0)
    throw ShapeError("maxpool2x2: spatial dims must be even, got " +
                     detail::shape_str(x.shape()));
  Tensor<T> y({B, C, H / 2, W / 2});
  auto argmax = std::make_shared<std::vector<int>>(y.size());
  kernels::maxpool2x2_forward(x.data(), y.data(), argmax->data(), B, C, H, W);

  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      const int plane = H * W, oplane = (H / 2) * (W / 2);
      for (int bc = 0; bc < B * C; ++bc)
        for (int p = 0; p < oplane; ++p)
          x.grad()[(int64_t)bc * plane + (*argmax)[(int64_t)bc * oplane + p]] +=
              y.grad()[(int64_t)bc * oplane + p];
    });
  }
  return y;
}

// General bilinear resize with half-pixel centers (up or down).
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w) {
  detail::expect_rank(x, 4, "resize_bilinear");
  if (out_h <= 0 || out_w <= 0)
    throw ShapeError("resize_bilinear: zero-sized target");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> y({B, C, out_h, out_w});
  kernels::resize_bilinear_forward(x.data(), y.data(), B, C, H, W, out_h,
                                   out_w);
  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      kernels::resize_bilinear_backward(y.grad(), x.grad(), B, C, H, W,
                                        out_h, out_w);
    });
  }
  return y;
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int out_h, int out_w) {
  if (out_h < x.dim(2) || out_w < x.dim(3))
    throw ShapeError("upsample_bilinear: target smaller than input");
  return resize_bilinear(x, out_h, out_w);
}

template <typename T>
Tensor<T> layer_norm_channels(const Tensor<T>& x, const Tensor<T>& gamma,
                              const Tensor<T>& beta, T eps = T(1e-6)) {
  detail::expect_rank(x, 4, "layer_norm_channels");
  const int B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (gamma.size() != C || beta.size() != C)
    throw ShapeError("layer_norm_channels: gamma/beta length != channels");
  if (!(eps > T(0))) throw ShapeError("layer_norm_channels: eps must be > 0");

  Tensor<T> y(x.shape());
  auto mean = std::make_shared<std::vector<T>>((int64_t)B * HW);
  auto rstd = std::make_shared<std::vector<T>>((int64_t)B * HW);
  kernels::layer_norm_channels_forward(x.data(), gamma.data(), beta.data(),
                                       eps, y.data(), mean->data(),
                                       rstd->data(), B, C, HW);
  detail::check_finite(y, "layer_norm_channels");

  if (grad_enabled<T>() && (x.requires_grad() || gamma.requires_grad() ||
                            beta.requires_grad())) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      if (x.requires_grad()) {
        x.ensure_grad();
        kernels::layer_norm_channels_backward_input(
            x.data(), gamma.data(), mean->data(), rstd->data(), y.grad(),
            x.grad(), B, C, HW);
      }
      if (gamma.requires_grad() || beta.requires_grad()) {
        gamma.ensure_grad();
        beta.ensure_grad();
        for (int b = 0; b < B; ++b) {
          for (int c = 0; c < C; ++c) {
            T gg = T(0), gb = T(0);
            const int64_t base = ((int64_t)b * C + c) * HW;
            for (int p = 0; p < HW; ++p) {
              const T xhat = (x.data()[base + p] - (*mean)[(int64_t)b * HW + p]) *
                             (*rstd)[(int64_t)b * HW + p];
              gg += y.grad()[base + p] * xhat;
              gb += y.grad()[base + p];
            }
            gamma.grad()[c] += gg;
            beta.grad()[c] += gb;
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  kernels::gelu_forward(x.data(), y.data(), x.size());
  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      kernels::gelu_backward(x.data(), y.grad(), x.grad(), x.size());
    });
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  kernels::sigmoid_forward(x.data(), y.data(), x.size());
  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      kernels::sigmoid_backward(y.data(), y.grad(), x.grad(), x.size());
    });
  }
  return y;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::expect_rank(x, 2, "linear input");
  detail::expect_rank(w, 2, "linear weight");
  const int B = x.dim(0), N = x.dim(1), M = w.dim(0);
  if (w.dim(1) != N)
    throw ShapeError("linear: weight inner dim " + std::to_string(w.dim(1)) +
                     " != input features " + std::to_string(N));
  if (b.size() != M) throw ShapeError("linear: bias length != out features");

  Tensor<T> y({B, M});
  kernels::linear_forward(x.data(), w.data(), b.data(), y.data(), B, N, M);

  if (grad_enabled<T>() &&
      (x.requires_grad() || w.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      const T* gy = y.grad();
      if (x.requires_grad()) {
        x.ensure_grad();
        for (int bb = 0; bb < B; ++bb)
          for (int n = 0; n < N; ++n) {
            T acc = T(0);
            for (int m = 0; m < M; ++m)
              acc += gy[(int64_t)bb * M + m] * w.data()[(int64_t)m * N + n];
            x.grad()[(int64_t)bb * N + n] += acc;
          }
      }
      if (w.requires_grad()) {
        w.ensure_grad();
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            T acc = T(0);
            for (int bb = 0; bb < B; ++bb)
              acc += gy[(int64_t)bb * M + m] * x.data()[(int64_t)bb * N + n];
            w.grad()[(int64_t)m * N + n] += acc;
          }
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        for (int m = 0; m < M; ++m) {
          T acc = T(0);
          for (int bb = 0; bb < B; ++bb) acc += gy[(int64_t)bb * M + m];
          b.grad()[m] += acc;
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  detail::expect_rank(x, 4, "global_avg_pool");
  const int B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor<T> y({B, C});
  for (int bc = 0; bc < B * C; ++bc) {
    T acc = T(0);
    for (int p = 0; p < HW; ++p) acc += x.data()[(int64_t)bc * HW + p];
    y.data()[bc] = acc / T(HW);
  }
  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      for (int bc = 0; bc < B * C; ++bc) {
        const T g = y.grad()[bc] / T(HW);
        for (int p = 0; p < HW; ++p) x.grad()[(int64_t)bc * HW + p] += g;
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
  detail::expect_rank(x, 4, "global_max_pool");
  const int B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor<T> y({B, C});
  auto argmax = std::make_shared<std::vector<int>>(B * C);
  for (int bc = 0; bc < B * C; ++bc) {
    int best = 0;
    T bv = x.data()[(int64_t)bc * HW];
    for (int p = 1; p < HW; ++p) {
      const T v = x.data()[(int64_t)bc * HW + p];
      if (v > bv) {
        bv = v;
        best = p;
      }
    }
    y.data()[bc] = bv;
    (*argmax)[bc] = best;
  }
  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      for (int bc = 0; bc < B * C; ++bc)
        x.grad()[(int64_t)bc * HW + (*argmax)[bc]] += y.grad()[bc];
    });
  }
  return y;
}

// Softmax over the last axis, max-subtracted.
template <typename T>
Tensor<T> softmax_vec(const Tensor<T>& x) {
  const int N = x.shape().back();
  const int64_t slices = x.size() / N;
  Tensor<T> y(x.shape());
  for (int64_t s = 0; s < slices; ++s) {
    const T* xs = x.data() + s * N;
    T* ys = y.data() + s * N;
    T mx = xs[0];
    for (int i = 1; i < N; ++i) mx = std::max(mx, xs[i]);
    T sum = T(0);
    for (int i = 0; i < N; ++i) {
      ys[i] = std::exp(xs[i] - mx);
      sum += ys[i];
    }
    for (int i = 0; i < N; ++i) ys[i] /= sum;
  }
  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      for (int64_t s = 0; s < slices; ++s) {
        const T* ys = y.data() + s * N;
        const T* gys = y.grad() + s * N;
        T dot = T(0);
        for (int i = 0; i < N; ++i) dot += gys[i] * ys[i];
        for (int i = 0; i < N; ++i)
          x.grad()[s * N + i] += ys[i] * (gys[i] - dot);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shape mismatch " + detail::shape_str(a.shape()) +
                     " vs " + detail::shape_str(b.shape()));
  Tensor<T> y(a.shape());
  for (int64_t i = 0; i < y.size(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
  if (grad_enabled<T>() && (a.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      if (a.requires_grad()) {
        a.ensure_grad();
        for (int64_t i = 0; i < y.size(); ++i) a.grad()[i] += y.grad()[i];
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        for (int64_t i = 0; i < y.size(); ++i) b.grad()[i] += y.grad()[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> y(a.shape());
  for (int64_t i = 0; i < y.size(); ++i) y.data()[i] = a.data()[i] * c;
  if (grad_enabled<T>() && a.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      a.ensure_grad();
      for (int64_t i = 0; i < y.size(); ++i) a.grad()[i] += c * y.grad()[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_rank(a, 4, "concat_channels");
  detail::expect_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw ShapeError("concat_channels: non-channel dims differ: " +
                     detail::shape_str(a.shape()) + " vs " +
                     detail::shape_str(b.shape()));
  const int B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1),
            HW = a.dim(2) * a.dim(3);
  Tensor<T> y({B, Ca + Cb, a.dim(2), a.dim(3)});
  for (int bb = 0; bb < B; ++bb) {
    std::copy(a.data() + (int64_t)bb * Ca * HW,
              a.data() + (int64_t)(bb + 1) * Ca * HW,
              y.data() + (int64_t)bb * (Ca + Cb) * HW);
    std::copy(b.data() + (int64_t)bb * Cb * HW,
              b.data() + (int64_t)(bb + 1) * Cb * HW,
              y.data() + (int64_t)bb * (Ca + Cb) * HW + (int64_t)Ca * HW);
  }
  if (grad_enabled<T>() && (a.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      for (int bb = 0; bb < B; ++bb) {
        const T* gy = y.grad() + (int64_t)bb * (Ca + Cb) * HW;
        if (a.requires_grad()) {
          a.ensure_grad();
          for (int64_t i = 0; i < (int64_t)Ca * HW; ++i)
            a.grad()[(int64_t)bb * Ca * HW + i] += gy[i];
        }
        if (b.requires_grad()) {
          b.ensure_grad();
          for (int64_t i = 0; i < (int64_t)Cb * HW; ++i)
            b.grad()[(int64_t)bb * Cb * HW + i] += gy[(int64_t)Ca * HW + i];
        }
      }
    });
  }
  return y;
}

// Scalar sum over all elements (fixed, serial summation order).
template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> y({1});
  T acc = T(0);
  for (int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  y.data()[0] = acc;
  if (grad_enabled<T>() && x.requires_grad()) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      x.ensure_grad();
      const T g = y.grad()[0];
      for (int64_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
    });
  }
  return y;
}

// y[b,c,p] = sum_s alpha[b,s] * values[s][b,c,p]  (stage-attention mix).
template <typename T>
Tensor<T> stage_mix(const Tensor<T>& alpha,
                    const std::vector<Tensor<T>>& values) {
  detail::expect_rank(alpha, 2, "stage_mix alpha");
  const int B = alpha.dim(0), S = alpha.dim(1);
  if ((int)values.size() != S)
    throw ShapeError("stage_mix: value count != alpha columns");
  const auto& vs = values[0].shape();
  for (const auto& v : values)
    if (v.shape() != vs) throw ShapeError("stage_mix: value shape mismatch");
  const int64_t plane = (int64_t)vs[1] * vs[2] * vs[3];
  Tensor<T> y(vs);
  for (int b = 0; b < B; ++b)
    for (int64_t p = 0; p < plane; ++p) {
      T acc = T(0);
      for (int s = 0; s < S; ++s)
        acc += alpha.data()[(int64_t)b * S + s] *
               values[s].data()[(int64_t)b * plane + p];
      y.data()[(int64_t)b * plane + p] = acc;
    }

  bool any = alpha.requires_grad();
  for (const auto& v : values) any = any || v.requires_grad();
  if (grad_enabled<T>() && any) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      for (int s = 0; s < S; ++s) {
        if (values[s].requires_grad()) {
          values[s].ensure_grad();
          for (int b = 0; b < B; ++b) {
            const T a = alpha.data()[(int64_t)b * S + s];
            for (int64_t p = 0; p < plane; ++p)
              values[s].grad()[(int64_t)b * plane + p] +=
                  a * y.grad()[(int64_t)b * plane + p];
          }
        }
      }
      if (alpha.requires_grad()) {
        alpha.ensure_grad();
        for (int b = 0; b < B; ++b)
          for (int s = 0; s < S; ++s) {
            T acc = T(0);
            for (int64_t p = 0; p < plane; ++p)
              acc += y.grad()[(int64_t)b * plane + p] *
                     values[s].data()[(int64_t)b * plane + p];
            alpha.grad()[(int64_t)b * S + s] += acc;
          }
      }
    });
  }
  return y;
}

// Row-wise dot product of two [B,N] tensors -> [B,1].
template <typename T>
Tensor<T> rowwise_dot(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_rank(a, 2, "rowwise_dot");
  if (a.shape() != b.shape()) throw ShapeError("rowwise_dot: shape mismatch");
  const int B = a.dim(0), N = a.dim(1);
  Tensor<T> y({B, 1});
  for (int bb = 0; bb < B; ++bb) {
    T acc = T(0);
    for (int n = 0; n < N; ++n)
      acc += a.data()[(int64_t)bb * N + n] * b.data()[(int64_t)bb * N + n];
    y.data()[bb] = acc;
  }
  if (grad_enabled<T>() && (a.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tape<T>::current()->record([=]() {
      if (!y.has_grad()) return;
      for (int bb = 0; bb < B; ++bb) {
        const T g = y.grad()[bb];
        if (a.requires_grad()) {
          a.ensure_grad();
          for (int n = 0; n < N; ++n)
            a.grad()[(int64_t)bb * N + n] += g * b.data()[(int64_t)bb * N + n];
        }
        if (b.requires_grad()) {
          b.ensure_grad();
          for (int n = 0; n < N; ++n)
            b.grad()[(int64_t)bb * N + n] += g * a.data()[(int64_t)bb * N + n];
        }
      }
    });
  }
  return y;
}

// Detached copy: same data, no graph participation.
template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  std::copy(x.data(), x.data() + x.size(), y.data());
  return y;
}

}  // namespace litenext
