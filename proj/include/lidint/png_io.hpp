#pragma once

#include <string>
#include <vector>

#include "lidint/image.hpp"

namespace lidint {

/// Decoded PNG, samples normalized to [0, 1] by the source bit depth.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 (gray) or 3 (rgb)
  int bit_depth = 0;  // 8 or 16
  std::vector<double> data;  // interleaved, row-major
};

PngImage load_png(const std::string& path);

/// 16-bit writers quantize with round(v * 65535); encoders use fixed
/// settings so identical inputs give identical bytes.
void save_png_gray16(const std::string& path, const GrayMap& gray);
void save_png_gray8(const std::string& path, const MaskMap& mask);
void save_png_rgb16(const std::string& path, const EncodedImage& img);

GrayMap png_to_gray(const PngImage& png);
EncodedImage png_to_encoded(const PngImage& png);

}  // namespace lidint
