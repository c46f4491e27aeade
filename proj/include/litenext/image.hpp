#pragma once

// 8-bit PNG read/write (libpng) plus float-image resize helpers.
// Images are HWC float buffers scaled to [0,1].

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace litenext {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;            // 1 (gray) or 3 (rgb)
  std::vector<float> pixels;   // HWC, values in [0,1]

  float at(int y, int x, int c) const {
    return pixels[((int64_t)y * width + x) * channels + c];
  }
};

Image read_png(const std::string& path);
void write_png_gray(const std::string& path, const std::vector<uint8_t>& px,
                    int width, int height);
void write_png_rgb(const std::string& path, const std::vector<uint8_t>& px,
                   int width, int height);

// Half-pixel-center bilinear resize.
Image resize_bilinear_image(const Image& src, int out_w, int out_h);
// Nearest-neighbor resize (used for masks).
Image resize_nearest_image(const Image& src, int out_w, int out_h);

}  // namespace litenext
