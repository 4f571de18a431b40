#include "lidint/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lidint {

namespace {

void require_shape(int w, int h, std::size_t n, std::size_t per_pixel, const char* what) {
  if (w < 2 || h < 2) {
    throw ValidationError(std::string(what) + ": width and height must be >= 2, got " +
                          std::to_string(w) + "x" + std::to_string(h));
  }
  const std::size_t expect = static_cast<std::size_t>(w) * h * per_pixel;
  if (n != expect) {
    throw ShapeMismatchError(std::string(what) + ": expected " + std::to_string(expect) +
                             " values for " + std::to_string(w) + "x" + std::to_string(h) +
                             ", got " + std::to_string(n));
  }
}

}  // namespace

void require_same_shape(int wa, int ha, int wb, int hb, const char* what) {
  if (wa != wb || ha != hb) {
    throw ShapeMismatchError(std::string(what) + ": shape " + std::to_string(wa) + "x" +
                             std::to_string(ha) + " vs " + std::to_string(wb) + "x" +
                             std::to_string(hb));
  }
}

EncodedImage::EncodedImage(int w, int h, std::vector<double> values)
    : width(w), height(h), data(std::move(values)) {
  require_shape(w, h, data.size(), 3, "EncodedImage");
}

LinearImage::LinearImage(int w, int h, std::vector<double> values)
    : width(w), height(h), data(std::move(values)) {
  require_shape(w, h, data.size(), 3, "LinearImage");
  for (double& v : data) {
    if (!std::isfinite(v)) throw ValidationError("LinearImage: non-finite value");
    v = std::clamp(v, 0.0, 1.0 + kUnitEps);
  }
}

LinearImage LinearImage::constant(int w, int h, double r, double g, double b) {
  std::vector<double> values(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t p = 0; p < values.size(); p += 3) {
    values[p] = r;
    values[p + 1] = g;
    values[p + 2] = b;
  }
  return LinearImage(w, h, std::move(values));
}

GrayMap::GrayMap(int w, int h, std::vector<double> values)
    : width(w), height(h), data(std::move(values)) {
  require_shape(w, h, data.size(), 1, "GrayMap");
  for (double v : data) {
    if (!std::isfinite(v)) throw ValidationError("GrayMap: non-finite value");
  }
}

GrayMap GrayMap::constant(int w, int h, double value) {
  return GrayMap(w, h, std::vector<double>(static_cast<std::size_t>(w) * h, value));
}

MaskMap::MaskMap(int w, int h, std::vector<std::uint8_t> flags)
    : width(w), height(h), on(std::move(flags)) {
  require_shape(w, h, on.size(), 1, "MaskMap");
  for (std::uint8_t f : on) {
    if (f > 1) throw ValidationError("MaskMap: flags must be exactly 0 or 1");
  }
}

MaskMap MaskMap::full(int w, int h) {
  return MaskMap(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 1));
}

MaskMap MaskMap::empty(int w, int h) {
  return MaskMap(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0));
}

std::size_t MaskMap::count_on() const {
  std::size_t n = 0;
  for (std::uint8_t f : on) n += f;
  return n;
}

GammaConfig::GammaConfig(double g) : gamma(g) {
  if (!(g > 0.0) || !std::isfinite(g)) {
    throw ValidationError("GammaConfig: gamma must be positive and finite");
  }
}

LinearImage inverse_gamma(const EncodedImage& img, const GammaConfig& cfg) {
  std::vector<double> out(img.data.size());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(x, y, c);
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
          throw ValidationError("inverse_gamma: value " + std::to_string(v) + " at pixel (" +
                                std::to_string(x) + ", " + std::to_string(y) + ") channel " +
                                std::to_string(c) + " outside [0, 1]");
        }
        out[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = std::pow(v, cfg.gamma);
      }
    }
  }
  return LinearImage(img.width, img.height, std::move(out));
}

EncodedImage apply_gamma(const LinearImage& img, const GammaConfig& cfg) {
  const double inv = 1.0 / cfg.gamma;
  std::vector<double> out(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out[i] = std::pow(std::clamp(img.data[i], 0.0, 1.0), inv);
  }
  return EncodedImage(img.width, img.height, std::move(out));
}

GrayMap luminance(const LinearImage& img) {
  std::vector<double> out(img.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double f =
        kLumaR * img.data[p * 3] + kLumaG * img.data[p * 3 + 1] + kLumaB * img.data[p * 3 + 2];
    out[p] = std::clamp(f, 0.0, 1.0);
  }
  return GrayMap(img.width, img.height, std::move(out));
}

ChromaMap chromaticity(const LinearImage& img) {
  ChromaMap out;
  out.width = img.width;
  out.height = img.height;
  out.data.resize(img.pixel_count() * 2);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const double r = img.data[p * 3];
    const double g = img.data[p * 3 + 1];
    const double b = img.data[p * 3 + 2];
    const double sum = r + g + b;
    if (sum >= kChromaEps) {
      out.data[p * 2] = r / sum;
      out.data[p * 2 + 1] = g / sum;
    } else {
      out.data[p * 2] = 1.0 / 3.0;
      out.data[p * 2 + 1] = 1.0 / 3.0;
    }
  }
  return out;
}

}  // namespace lidint
