#pragma once

// Strong/weak augmentation for the dual-branch trainer. Geometric
// parameters are recorded so mask alignment can be replayed and checked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "litenext/data_io.hpp"

namespace litenext {

struct GeoTransform {
  int rot90 = 0;          // quarter turns, counter-clockwise
  float angle_deg = 0;    // additional small-angle rotation
  bool hflip = false;
  bool vflip = false;
  // Crop window (applied last, resized back to full resolution).
  int crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;  // 0 w/h = full frame
};

struct AugmentedPair {
  std::vector<float> strong_image;  // CHW
  std::vector<float> weak_image;    // CHW
  std::vector<float> mask;          // HW, binary, aligned with strong_image
  GeoTransform strong_geo;
  GeoTransform weak_geo;
};

namespace detail {

// Inverse-maps one output coordinate through the whole geometric chain and
// samples the source plane (square images).
template <bool kNearest>
inline float geo_sample(const float* src, int size, const GeoTransform& g,
                        int ox, int oy) {
  const int cw = g.crop_w > 0 ? g.crop_w : size;
  const int ch = g.crop_h > 0 ? g.crop_h : size;
  double x = g.crop_x + (ox + 0.5) * cw / (double)size - 0.5;
  double y = g.crop_y + (oy + 0.5) * ch / (double)size - 0.5;
  if (g.vflip) y = size - 1 - y;
  if (g.hflip) x = size - 1 - x;
  if (g.angle_deg != 0.0f) {
    const double a = -g.angle_deg * M_PI / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    const double m = (size - 1) / 2.0;
    const double dx = x - m, dy = y - m;
    x = m + c * dx - s * dy;
    y = m + s * dx + c * dy;
  }
  for (int r = 0; r < (g.rot90 & 3); ++r) {
    // Inverse of a 90-degree CCW rotation.
    const double nx = size - 1 - y, ny = x;
    x = nx;
    y = ny;
  }
  if constexpr (kNearest) {
    const int xi = (int)std::lround(x), yi = (int)std::lround(y);
    if (xi < 0 || xi >= size || yi < 0 || yi >= size) return 0.0f;
    return src[yi * size + xi];
  } else {
    if (x < -1 || x > size || y < -1 || y > size) return 0.0f;
    const int x0 = (int)std::floor(x), y0 = (int)std::floor(y);
    const double wx = x - x0, wy = y - y0;
    auto pick = [&](int yy, int xx) -> double {
      if (xx < 0 || xx >= size || yy < 0 || yy >= size) return 0.0;
      return src[yy * size + xx];
    };
    return (float)((pick(y0, x0) * (1 - wx) + pick(y0, x0 + 1) * wx) *
                       (1 - wy) +
                   (pick(y0 + 1, x0) * (1 - wx) + pick(y0 + 1, x0 + 1) * wx) *
                       wy);
  }
}

}  // namespace detail

// Applies the geometric transform to a CHW plane stack. Masks use nearest
// sampling and stay binary; images use bilinear.
inline std::vector<float> apply_geometric(const std::vector<float>& src,
                                          int channels, int size,
                                          const GeoTransform& g,
                                          bool nearest) {
  std::vector<float> out((size_t)channels * size * size);
  for (int c = 0; c < channels; ++c) {
    const float* sp = src.data() + (size_t)c * size * size;
    float* op = out.data() + (size_t)c * size * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        op[y * size + x] = nearest
                               ? detail::geo_sample<true>(sp, size, g, x, y)
                               : detail::geo_sample<false>(sp, size, g, x, y);
  }
  return out;
}

inline std::vector<float> binarize(std::vector<float> mask) {
  for (auto& v : mask) v = v > 0.5f ? 1.0f : 0.0f;
  return mask;
}

namespace detail {

inline GeoTransform draw_geo(std::mt19937_64& rng, int size, bool strong) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  GeoTransform g;
  g.rot90 = (int)(uni(rng) * 4.0) & 3;
  g.hflip = uni(rng) < 0.5;
  g.vflip = uni(rng) < 0.5;
  if (strong) {
    if (uni(rng) < 0.5) g.angle_deg = (float)((uni(rng) * 2 - 1) * 8.0);
    if (uni(rng) < 0.5) {
      const double scale = 0.82 + 0.18 * uni(rng);  // area fraction
      const int side = std::max(1, (int)std::lround(size * std::sqrt(scale)));
      g.crop_w = g.crop_h = side;
      g.crop_x = (int)(uni(rng) * (size - side + 1));
      g.crop_y = (int)(uni(rng) * (size - side + 1));
    }
  }
  return g;
}

inline void gaussian_blur(std::vector<float>& img, int channels, int size,
                          double sigma) {
  const int radius = std::max(1, (int)std::ceil(3 * sigma));
  std::vector<float> kernel(2 * radius + 1);
  float norm = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = (float)std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[i + radius];
  }
  for (auto& k : kernel) k /= norm;

  std::vector<float> tmp(img.size());
  for (int c = 0; c < channels; ++c) {
    const float* sp = img.data() + (size_t)c * size * size;
    float* tp = tmp.data() + (size_t)c * size * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, size - 1);
          acc += kernel[i + radius] * sp[y * size + xx];
        }
        tp[y * size + x] = acc;
      }
    float* op = img.data() + (size_t)c * size * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, size - 1);
          acc += kernel[i + radius] * tp[yy * size + x];
        }
        op[y * size + x] = acc;
      }
  }
}

inline void pixel_augment(std::vector<float>& img, int channels, int size,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (uni(rng) < 0.5) {  // color jitter: per-channel gain
    for (int c = 0; c < channels; ++c) {
      const float gain = (float)(0.9 + 0.2 * uni(rng));
      float* p = img.data() + (size_t)c * size * size;
      for (int i = 0; i < size * size; ++i) p[i] *= gain;
    }
  }
  if (uni(rng) < 0.5) {  // brightness/contrast
    const float bright = (float)((uni(rng) * 2 - 1) * 0.1);
    const float contrast = (float)(0.9 + 0.2 * uni(rng));
    for (auto& v : img) v = (v - 0.5f) * contrast + 0.5f + bright;
  }
  if (uni(rng) < 0.5) {  // gaussian blur
    const double sigma = 0.1 + 0.7 * uni(rng);
    gaussian_blur(img, channels, size, sigma);
  }
  for (auto& v : img) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace detail

// Geometric + photometric transforms; the mask follows the geometric part
// (nearest sampling, re-binarized).
inline void strong_augment(const SampleRecord& rec, std::mt19937_64& rng,
                           std::vector<float>& out_image,
                           std::vector<float>& out_mask, GeoTransform& geo) {
  geo = detail::draw_geo(rng, rec.width, /*strong=*/true);
  out_image = apply_geometric(rec.image, 3, rec.width, geo, false);
  out_mask = binarize(apply_geometric(rec.mask, 1, rec.width, geo, true));
  detail::pixel_augment(out_image, 3, rec.width, rng);
}

// Geometric transforms only, drawn independently of the strong branch.
inline std::vector<float> weak_augment(const SampleRecord& rec,
                                       std::mt19937_64& rng,
                                       GeoTransform& geo) {
  geo = detail::draw_geo(rng, rec.width, /*strong=*/false);
  return apply_geometric(rec.image, 3, rec.width, geo, false);
}

inline AugmentedPair make_augmented_pair(const SampleRecord& rec,
                                         std::mt19937_64& rng) {
  AugmentedPair pair;
  strong_augment(rec, rng, pair.strong_image, pair.mask, pair.strong_geo);
  pair.weak_image = weak_augment(rec, rng, pair.weak_geo);
  return pair;
}

}  // namespace litenext
