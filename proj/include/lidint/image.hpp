#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lidint/errors.hpp"

namespace lidint {

// Rec.709 luma weights, applied to linear-light values.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

// Pixels darker than this in every channel take neutral chromaticity.
inline constexpr double kChromaEps = 1e-4;

// Headroom allowed above 1.0 to absorb floating-point dust.
inline constexpr double kUnitEps = 1e-6;

/// Display-encoded RGB image, values in [0, 1], interleaved RGB row-major.
struct EncodedImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  EncodedImage() = default;
  EncodedImage(int w, int h, std::vector<double> values);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

/// Linear-light RGB image in [0, 1+eps]; the working radiometric quantity.
///
/// Construction clamps into range and rejects non-finite values. Shapes of
/// 2x2 or larger only: the neighbor-based operators need at least one edge
/// per axis.
struct LinearImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  LinearImage() = default;
  LinearImage(int w, int h, std::vector<double> values);
  static LinearImage constant(int w, int h, double r, double g, double b);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

/// Per-pixel scalar field (luminance, shade, LiDAR intensity, log-shade).
struct GrayMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayMap() = default;
  GrayMap(int w, int h, std::vector<double> values);
  static GrayMap constant(int w, int h, double value);
  static GrayMap zeros(int w, int h) { return constant(w, h, 0.0); }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel 0/1 observation flags.
struct MaskMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> on;

  MaskMap() = default;
  MaskMap(int w, int h, std::vector<std::uint8_t> flags);
  static MaskMap full(int w, int h);
  static MaskMap empty(int w, int h);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t count_on() const;
  bool at(int x, int y) const { return on[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// Per-pixel (r, g) chromaticity, interleaved.
struct ChromaMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double r(int x, int y) const { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
  double g(int x, int y) const { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
};

/// Power-law transfer function exponent; 2.2 is the usual display assumption.
struct GammaConfig {
  double gamma = 2.2;

  GammaConfig() = default;
  explicit GammaConfig(double g);
};

/// Undoes the display encoding: out = in^gamma, element-wise.
/// Rejects NaN and out-of-range input, naming the offending pixel.
LinearImage inverse_gamma(const EncodedImage& img, const GammaConfig& cfg = GammaConfig());

/// Re-applies the display encoding: out = in^(1/gamma).
EncodedImage apply_gamma(const LinearImage& img, const GammaConfig& cfg = GammaConfig());

/// Rec.709 luminance of a linear image, clamped into [0, 1].
GrayMap luminance(const LinearImage& img);

/// (r, g) = (R, G)/(R+G+B); near-black pixels take the neutral (1/3, 1/3).
ChromaMap chromaticity(const LinearImage& img);

void require_same_shape(int wa, int ha, int wb, int hb, const char* what);

}  // namespace lidint
