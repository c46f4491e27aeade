#include "litenext/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace litenext {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageError("cannot open " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError("png_create_info_struct failed");
  }
  std::vector<uint8_t> buf;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("undecodable image: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const int w = png_get_image_width(png, info);
  const int h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int ch = png_get_channels(png, info);
  buf.resize((size_t)h * w * ch);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + (size_t)y * w * ch;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img;
  img.width = w;
  img.height = h;
  img.channels = ch >= 3 ? 3 : 1;
  img.pixels.resize((size_t)h * w * img.channels);
  for (size_t i = 0; i < (size_t)h * w; ++i)
    for (int c = 0; c < img.channels; ++c)
      img.pixels[i * img.channels + c] = buf[i * ch + c] / 255.0f;
  return img;
}

namespace {

void write_png(const std::string& path, const std::vector<uint8_t>& px,
               int width, int height, int channels) {
  if ((int64_t)px.size() != (int64_t)width * height * channels)
    throw ImageError("write_png: buffer size mismatch for " + path);
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ImageError("cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<uint8_t*>(px.data()) + (size_t)y * width * channels;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray(const std::string& path, const std::vector<uint8_t>& px,
                    int width, int height) {
  write_png(path, px, width, height, 1);
}

void write_png_rgb(const std::string& path, const std::vector<uint8_t>& px,
                   int width, int height) {
  write_png(path, px, width, height, 3);
}

Image resize_bilinear_image(const Image& src, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw ImageError("resize: zero-sized target");
  Image dst;
  dst.width = out_w;
  dst.height = out_h;
  dst.channels = src.channels;
  dst.pixels.resize((size_t)out_w * out_h * src.channels);
  const float sx = (float)src.width / out_w, sy = (float)src.height / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    float fy = (oy + 0.5f) * sy - 0.5f;
    fy = std::max(0.0f, fy);
    int y0 = std::min((int)fy, src.height - 1);
    int y1 = std::min(y0 + 1, src.height - 1);
    const float wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      float fx = (ox + 0.5f) * sx - 0.5f;
      fx = std::max(0.0f, fx);
      int x0 = std::min((int)fx, src.width - 1);
      int x1 = std::min(x0 + 1, src.width - 1);
      const float wx = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const float top = src.at(y0, x0, c) * (1 - wx) + src.at(y0, x1, c) * wx;
        const float bot = src.at(y1, x0, c) * (1 - wx) + src.at(y1, x1, c) * wx;
        dst.pixels[((size_t)oy * out_w + ox) * src.channels + c] =
            top * (1 - wy) + bot * wy;
      }
    }
  }
  return dst;
}

Image resize_nearest_image(const Image& src, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw ImageError("resize: zero-sized target");
  Image dst;
  dst.width = out_w;
  dst.height = out_h;
  dst.channels = src.channels;
  dst.pixels.resize((size_t)out_w * out_h * src.channels);
  for (int oy = 0; oy < out_h; ++oy) {
    const int y = std::min((int)(((int64_t)oy * src.height + src.height / 2) /
                                 out_h),
                           src.height - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      const int x = std::min(
          (int)(((int64_t)ox * src.width + src.width / 2) / out_w),
          src.width - 1);
      for (int c = 0; c < src.channels; ++c)
        dst.pixels[((size_t)oy * out_w + ox) * src.channels + c] =
            src.at(y, x, c);
    }
  }
  return dst;
}

}  // namespace litenext
