// Benchmarks the OpenMP kernels against the serial reference
// implementations and verifies bitwise agreement on every workload.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "litenext/kernels.hpp"

using clk = std::chrono::steady_clock;
namespace k = litenext::kernels;

namespace {

std::vector<float> random_vec(int64_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = uni(rng);
  return v;
}

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = clk::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = clk::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool report(const char* name, double serial_ms, double omp_ms,
            const std::vector<float>& a, const std::vector<float>& b) {
  const bool same =
      std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
  std::printf("%-24s serial %8.2f ms   omp %8.2f ms   speedup %5.2fx   %s\n",
              name, serial_ms, omp_ms, serial_ms / omp_ms,
              same ? "bitwise-equal" : "MISMATCH");
  return same;
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  bool ok = true;

  // conv2d forward: 8x32x64x64, 64 output channels, 3x3.
  {
    const int B = 8, Cin = 32, H = 64, W = 64, Cout = 64, K = 3, pad = 1;
    auto x = random_vec((int64_t)B * Cin * H * W, 1);
    auto w = random_vec((int64_t)Cout * Cin * K * K, 2);
    auto bias = random_vec(Cout, 3);
    std::vector<float> ys((int64_t)B * Cout * H * W), yp(ys.size());
    const double ts = time_of(
        [&] {
          k::serial::conv2d_forward(x.data(), w.data(), bias.data(),
                                    ys.data(), B, Cin, H, W, Cout, K, 1, pad,
                                    H, W);
        },
        3);
    const double tp = time_of(
        [&] {
          k::conv2d_forward(x.data(), w.data(), bias.data(), yp.data(), B,
                            Cin, H, W, Cout, K, 1, pad, H, W);
        },
        3);
    ok &= report("conv2d_forward", ts, tp, ys, yp);

    auto gy = random_vec(ys.size(), 4);
    std::vector<float> gxs(x.size(), 0), gxp(x.size(), 0);
    const double bs = time_of(
        [&] {
          std::fill(gxs.begin(), gxs.end(), 0.0f);
          k::serial::conv2d_backward_input(w.data(), gy.data(), gxs.data(),
                                           B, Cin, H, W, Cout, K, 1, pad, H,
                                           W);
        },
        3);
    const double bp = time_of(
        [&] {
          std::fill(gxp.begin(), gxp.end(), 0.0f);
          k::conv2d_backward_input(w.data(), gy.data(), gxp.data(), B, Cin,
                                   H, W, Cout, K, 1, pad, H, W);
        },
        3);
    ok &= report("conv2d_backward_input", bs, bp, gxs, gxp);

    std::vector<float> gws(w.size(), 0), gwp(w.size(), 0), gbs(Cout, 0),
        gbp(Cout, 0);
    const double ws_t = time_of(
        [&] {
          std::fill(gws.begin(), gws.end(), 0.0f);
          std::fill(gbs.begin(), gbs.end(), 0.0f);
          k::serial::conv2d_backward_weight(x.data(), gy.data(), gws.data(),
                                            gbs.data(), B, Cin, H, W, Cout,
                                            K, 1, pad, H, W);
        },
        3);
    const double wp_t = time_of(
        [&] {
          std::fill(gwp.begin(), gwp.end(), 0.0f);
          std::fill(gbp.begin(), gbp.end(), 0.0f);
          k::conv2d_backward_weight(x.data(), gy.data(), gwp.data(),
                                    gbp.data(), B, Cin, H, W, Cout, K, 1,
                                    pad, H, W);
        },
        3);
    ok &= report("conv2d_backward_weight", ws_t, wp_t, gws, gwp);
  }

  // depthwise 7x7 on 8x128x64x64.
  {
    const int B = 8, C = 128, H = 64, W = 64, K = 7, pad = 3;
    auto x = random_vec((int64_t)B * C * H * W, 5);
    auto w = random_vec((int64_t)C * K * K, 6);
    auto bias = random_vec(C, 7);
    std::vector<float> ys(x.size()), yp(x.size());
    const double ts = time_of(
        [&] {
          k::serial::dwconv2d_forward(x.data(), w.data(), bias.data(),
                                      ys.data(), B, C, H, W, K, pad);
        },
        3);
    const double tp = time_of(
        [&] {
          k::dwconv2d_forward(x.data(), w.data(), bias.data(), yp.data(), B,
                              C, H, W, K, pad);
        },
        3);
    ok &= report("dwconv2d_forward", ts, tp, ys, yp);
  }

  // layer norm on 8x128x64x64.
  {
    const int B = 8, C = 128, HW = 64 * 64;
    auto x = random_vec((int64_t)B * C * HW, 8);
    auto gamma = random_vec(C, 9);
    auto beta = random_vec(C, 10);
    std::vector<float> ys(x.size()), yp(x.size());
    std::vector<float> mean((int64_t)B * HW), rstd((int64_t)B * HW);
    const double ts = time_of(
        [&] {
          k::serial::layer_norm_channels_forward(
              x.data(), gamma.data(), beta.data(), 1e-6f, ys.data(),
              mean.data(), rstd.data(), B, C, HW);
        },
        5);
    const double tp = time_of(
        [&] {
          k::layer_norm_channels_forward(x.data(), gamma.data(), beta.data(),
                                         1e-6f, yp.data(), mean.data(),
                                         rstd.data(), B, C, HW);
        },
        5);
    ok &= report("layer_norm_forward", ts, tp, ys, yp);
  }

  // bilinear resize 8x64: 32x32 -> 256x256.
  {
    const int B = 8, C = 64, H = 32, W = 32, OH = 256, OW = 256;
    auto x = random_vec((int64_t)B * C * H * W, 11);
    std::vector<float> ys((int64_t)B * C * OH * OW), yp(ys.size());
    const double ts = time_of(
        [&] {
          k::serial::resize_bilinear_forward(x.data(), ys.data(), B, C, H, W,
                                             OH, OW);
        },
        5);
    const double tp = time_of(
        [&] {
          k::resize_bilinear_forward(x.data(), yp.data(), B, C, H, W, OH,
                                     OW);
        },
        5);
    ok &= report("resize_bilinear", ts, tp, ys, yp);
  }

  // gelu on 32M elements.
  {
    const int64_t n = 32 << 20;
    auto x = random_vec(n, 12);
    std::vector<float> ys(n), yp(n);
    const double ts =
        time_of([&] { k::serial::gelu_forward(x.data(), ys.data(), n); }, 3);
    const double tp =
        time_of([&] { k::gelu_forward(x.data(), yp.data(), n); }, 3);
    ok &= report("gelu_forward", ts, tp, ys, yp);
  }

  if (!ok) {
    std::printf("FAIL: OpenMP kernels diverge from the serial reference\n");
    return 1;
  }
  return 0;
}
