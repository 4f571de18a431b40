#include "lidint/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

namespace lidint {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint16_t quantize16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

void write_png(const std::string& path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::uint8_t>& bytes, std::size_t row_bytes) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);  // fixed so output bytes are reproducible
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * row_bytes);
  }
  png_write_image(png, rows.data());
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

PngImage load_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);

  // Normalize exotic encodings to 8/16-bit gray or RGB.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // libpng stores 16-bit big-endian
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if ((bit_depth != 8 && bit_depth != 16) || (channels != 1 && channels != 3)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path + ": unsupported PNG layout (" + std::to_string(channels) + " channels, " +
                  std::to_string(bit_depth) + "-bit)");
  }

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> bytes(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  PngImage out;
  out.width = width;
  out.height = height;
  out.channels = channels;
  out.bit_depth = bit_depth;
  out.data.resize(static_cast<std::size_t>(width) * height * channels);
  if (bit_depth == 8) {
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = bytes[i] / 255.0;
  } else {
    const std::uint16_t* samples = reinterpret_cast<const std::uint16_t*>(bytes.data());
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = samples[i] / 65535.0;
  }
  return out;
}

void save_png_gray16(const std::string& path, const GrayMap& gray) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(gray.width) * gray.height * 2);
  std::uint16_t* samples = reinterpret_cast<std::uint16_t*>(bytes.data());
  for (std::size_t p = 0; p < gray.pixel_count(); ++p) samples[p] = quantize16(gray.data[p]);
  // Byte-swap to PNG network order.
  for (std::size_t p = 0; p < gray.pixel_count(); ++p) {
    std::swap(bytes[p * 2], bytes[p * 2 + 1]);
  }
  write_png(path, gray.width, gray.height, PNG_COLOR_TYPE_GRAY, 16, bytes,
            static_cast<std::size_t>(gray.width) * 2);
}

void save_png_gray8(const std::string& path, const MaskMap& mask) {
  std::vector<std::uint8_t> bytes(mask.on.size());
  for (std::size_t p = 0; p < mask.on.size(); ++p) bytes[p] = mask.on[p] ? 255 : 0;
  write_png(path, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 8, bytes,
            static_cast<std::size_t>(mask.width));
}

void save_png_rgb16(const std::string& path, const EncodedImage& img) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.width) * img.height * 6);
  std::uint16_t* samples = reinterpret_cast<std::uint16_t*>(bytes.data());
  for (std::size_t i = 0; i < img.data.size(); ++i) samples[i] = quantize16(img.data[i]);
  for (std::size_t i = 0; i < img.data.size(); ++i) std::swap(bytes[i * 2], bytes[i * 2 + 1]);
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 16, bytes,
            static_cast<std::size_t>(img.width) * 6);
}

GrayMap png_to_gray(const PngImage& png) {
  if (png.channels == 1) return GrayMap(png.width, png.height, png.data);
  std::vector<double> gray(static_cast<std::size_t>(png.width) * png.height);
  for (std::size_t p = 0; p < gray.size(); ++p) {
    gray[p] = kLumaR * png.data[p * 3] + kLumaG * png.data[p * 3 + 1] + kLumaB * png.data[p * 3 + 2];
  }
  return GrayMap(png.width, png.height, std::move(gray));
}

EncodedImage png_to_encoded(const PngImage& png) {
  if (png.channels == 3) return EncodedImage(png.width, png.height, png.data);
  std::vector<double> rgb(static_cast<std::size_t>(png.width) * png.height * 3);
  for (std::size_t p = 0; p < png.data.size(); ++p) {
    rgb[p * 3] = rgb[p * 3 + 1] = rgb[p * 3 + 2] = png.data[p];
  }
  return EncodedImage(png.width, png.height, std::move(rgb));
}

}  // namespace lidint
