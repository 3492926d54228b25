#pragma once

// 8-bit RGB PNG/JPEG <-> [3 x H x W] float tensors in [0, 1]. Links libpng and libjpeg.

#include <png.h>
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "soynet/errors.hpp"
#include "soynet/tensor.hpp"

namespace soynet {

using Image = Tensor<float>;  // [3 x H x W], values in [0, 1]

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

inline Image from_interleaved(const std::vector<unsigned char>& rgb, std::size_t h, std::size_t w) {
  Image img({3, h, w});
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < 3; ++c) img[c * h * w + p] = static_cast<float>(rgb[p * 3 + c]) / 255.0f;
  return img;
}

inline unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline Image read_png(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<unsigned char> rgb;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG '" + path + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_expand(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  rgb.resize(static_cast<std::size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_interleaved(rgb, h, w);
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

inline Image read_jpeg(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = [](j_common_ptr c) { std::longjmp(reinterpret_cast<JpegError*>(c->err)->jump, 1); };
  std::vector<unsigned char> rgb;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("malformed JPEG '" + path + "'");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const std::size_t w = cinfo.output_width, h = cinfo.output_height;
  rgb.resize(w * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_interleaved(rgb, h, w);
}

}  // namespace detail

/// Loads a PNG or JPEG (by extension) as [3 x H x W] in [0, 1].
inline Image read_image(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".jpg" || ext == ".jpeg") return detail::read_jpeg(path);
  throw IoError("unsupported image type '" + ext + "' for " + path);
}

/// Writes an 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
inline void write_png(const std::string& path, const Image& img) {
  if (img.rank() != 3 || img.dim(0) != 3) throw ShapeError("write_png expects a 3xHxW image");
  const std::size_t h = img.dim(1), w = img.dim(2);
  std::vector<unsigned char> rgb(h * w * 3);
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < 3; ++c) rgb[p * 3 + c] = detail::to_byte(img[c * h * w + p]);
  detail::FilePtr f = detail::open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> rows(h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < h; ++y) rows[y] = rgb.data() + y * w * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Rounds every value to the nearest 1/255, i.e. what a PNG round trip yields.
inline Image quantize_8bit(Image img) {
  for (float& v : img.values()) v = static_cast<float>(detail::to_byte(v)) / 255.0f;
  return img;
}

}  // namespace soynet
