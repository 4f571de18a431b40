#include "lidint/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lidint {

void LossWeights::validate() const {
  for (double w : {content, kl, image_recon, prior_recon, physical, smooth, intensity}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("LossWeights: all weights must be finite and >= 0");
    }
  }
}

void AffinityConfig::validate() const {
  if (!(sigma_pos > 0.0 && sigma_lum > 0.0 && sigma_chroma > 0.0)) {
    throw ValidationError("AffinityConfig: bandwidths must be positive");
  }
}

double physical_loss(const LinearImage& image, const LinearImage& albedo, const GrayMap& shade) {
  require_same_shape(image.width, image.height, albedo.width, albedo.height, "physical_loss");
  require_same_shape(image.width, image.height, shade.width, shade.height, "physical_loss");
  double sum = 0.0;
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    const double s = shade.data[p];
    for (int c = 0; c < 3; ++c) {
      sum += std::abs(image.data[p * 3 + c] - albedo.data[p * 3 + c] * s);
    }
  }
  return sum / (static_cast<double>(image.pixel_count()) * 3.0);
}

double affinity(const FeatureVector& fi, const FeatureVector& fj, const AffinityConfig& cfg) {
  cfg.validate();
  const double dx = (fi.x - fj.x) / cfg.sigma_pos;
  const double dy = (fi.y - fj.y) / cfg.sigma_pos;
  const double dl = (fi.lum - fj.lum) / cfg.sigma_lum;
  const double dr = (fi.r - fj.r) / cfg.sigma_chroma;
  const double dg = (fi.g - fj.g) / cfg.sigma_chroma;
  return std::exp(-0.5 * (dx * dx + dy * dy + dl * dl + dr * dr + dg * dg));
}

std::vector<FeatureVector> build_features(const LinearImage& img) {
  const GrayMap lum = luminance(img);
  const ChromaMap chroma = chromaticity(img);
  std::vector<FeatureVector> features(img.pixel_count());
  const double inv_w = 1.0 / (img.width - 1);
  const double inv_h = 1.0 / (img.height - 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * img.width + x;
      features[p] = {x * inv_w, y * inv_h, lum.data[p], chroma.data[p * 2], chroma.data[p * 2 + 1]};
    }
  }
  return features;
}

double smooth_loss(const LinearImage& albedo, const LinearImage& image,
                   const AffinityConfig& cfg) {
  require_same_shape(albedo.width, albedo.height, image.width, image.height, "smooth_loss");
  cfg.validate();
  const std::vector<FeatureVector> features = build_features(image);
  double sum = 0.0;
  for_each_neighbor_pair(image.width, image.height, cfg.neighborhood,
                         [&](std::size_t i, std::size_t j) {
                           const double v = affinity(features[i], features[j], cfg);
                           double l1 = 0.0;
                           for (int c = 0; c < 3; ++c) {
                             const double ri = std::max(albedo.data[i * 3 + c], kLogFloor);
                             const double rj = std::max(albedo.data[j * 3 + c], kLogFloor);
                             l1 += std::abs(std::log(ri) - std::log(rj));
                           }
                           sum += v * l1;
                         });
  return sum / static_cast<double>(image.pixel_count());
}

double intensity_consistency_loss(const LinearImage& image, const LinearImage& albedo,
                                  const GrayMap& shade, const GrayMap& lidar, const MaskMap& mask,
                                  const ScaleBias& sb) {
  require_same_shape(image.width, image.height, albedo.width, albedo.height,
                     "intensity_consistency_loss");
  require_same_shape(image.width, image.height, shade.width, shade.height,
                     "intensity_consistency_loss");
  require_same_shape(image.width, image.height, lidar.width, lidar.height,
                     "intensity_consistency_loss");
  require_same_shape(image.width, image.height, mask.width, mask.height,
                     "intensity_consistency_loss");
  const GrayMap lum_albedo = luminance(albedo);
  const GrayMap lum_image = luminance(image);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < mask.on.size(); ++p) {
    if (!mask.on[p]) continue;
    const double l = lidar.data[p];
    const double ratio = lum_image.data[p] / std::max(l, kIntensityRatioFloor);
    sum += std::abs(lum_albedo.data[p] - sb.s1 * l - sb.b1);
    sum += std::abs(shade.data[p] - sb.s2 * ratio - sb.b2);
    ++n;
  }
  if (n == 0) throw EmptyMaskError("intensity_consistency_loss: no masked pixels");
  return sum / static_cast<double>(n);
}

ScaleBiasFit fit_scale_bias(const GrayMap& target, const GrayMap& source, const MaskMap& mask) {
  require_same_shape(target.width, target.height, source.width, source.height, "fit_scale_bias");
  require_same_shape(target.width, target.height, mask.width, mask.height, "fit_scale_bias");
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < mask.on.size(); ++p) {
    if (!mask.on[p]) continue;
    sx += source.data[p];
    sy += target.data[p];
    ++n;
  }
  if (n < 2) throw EmptyMaskError("fit_scale_bias: needs at least 2 masked pixels");
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t p = 0; p < mask.on.size(); ++p) {
    if (!mask.on[p]) continue;
    const double dx = source.data[p] - mx;
    sxx += dx * dx;
    sxy += dx * (target.data[p] - my);
  }
  ScaleBiasFit fit;
  if (sxx <= 1e-12 * static_cast<double>(n)) {
    fit.s = 0.0;
    fit.b = my;
    fit.degenerate = true;
    return fit;
  }
  fit.s = std::max(sxy / sxx, 0.0);
  fit.b = my - fit.s * mx;
  return fit;
}

namespace {

double mean_abs_diff(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeMismatchError(std::string(what) + ": arrays must be non-empty and equal-sized (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

double mean_diff(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeMismatchError(std::string(what) + ": arrays must be non-empty and equal-sized");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] - b[i];
  return sum / static_cast<double>(a.size());
}

double mean_log(std::span<const double> scores, bool one_minus) {
  if (scores.empty()) throw ShapeMismatchError("adversarial_loss: empty score array");
  double sum = 0.0;
  for (double d : scores) {
    const double s = std::clamp(one_minus ? 1.0 - d : d, 1e-7, 1.0 - 1e-7);
    sum += std::log(s);
  }
  return sum / static_cast<double>(scores.size());
}

}  // namespace

double content_loss(const LatentBundle& bundle) {
  return mean_abs_diff(bundle.content_albedo, bundle.content_input, "content_loss") +
         mean_abs_diff(bundle.content_shade, bundle.content_input, "content_loss");
}

double kl_loss(std::span<const double> logp_albedo, std::span<const double> logq_albedo,
               std::span<const double> logp_shade, std::span<const double> logq_shade) {
  return mean_diff(logp_albedo, logq_albedo, "kl_loss") +
         mean_diff(logp_shade, logq_shade, "kl_loss");
}

double kl_loss(const LatentBundle& bundle) {
  return kl_loss(bundle.logp_albedo, bundle.logq_albedo, bundle.logp_shade, bundle.logq_shade);
}

double image_recon_loss(std::span<const double> recon_input, std::span<const double> input,
                        std::span<const double> recon_albedo, std::span<const double> albedo,
                        std::span<const double> recon_shade, std::span<const double> shade) {
  return mean_abs_diff(recon_input, input, "image_recon_loss") +
         mean_abs_diff(recon_albedo, albedo, "image_recon_loss") +
         mean_abs_diff(recon_shade, shade, "image_recon_loss");
}

double prior_recon_loss(std::span<const double> recovered_input, std::span<const double> input,
                        std::span<const double> recovered_albedo, std::span<const double> albedo,
                        std::span<const double> recovered_shade, std::span<const double> shade) {
  return mean_abs_diff(recovered_input, input, "prior_recon_loss") +
         mean_abs_diff(recovered_albedo, albedo, "prior_recon_loss") +
         mean_abs_diff(recovered_shade, shade, "prior_recon_loss");
}

double adversarial_loss(std::span<const double> albedo_fake_scores,
                        std::span<const double> albedo_real_scores,
                        std::span<const double> shade_fake_scores,
                        std::span<const double> shade_real_scores) {
  return mean_log(albedo_fake_scores, true) + mean_log(albedo_real_scores, false) +
         mean_log(shade_fake_scores, true) + mean_log(shade_real_scores, false);
}

double adversarial_loss(const LatentBundle& bundle) {
  return adversarial_loss(bundle.albedo_fake_scores, bundle.albedo_real_scores,
                          bundle.shade_fake_scores, bundle.shade_real_scores);
}

double total_objective(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  for (double v : {parts.adversarial, parts.content, parts.kl, parts.image_recon,
                   parts.prior_recon, parts.physical, parts.smooth, parts.intensity}) {
    if (!std::isfinite(v)) throw NonFiniteError("total_objective: non-finite loss part");
  }
  return parts.adversarial + weights.content * parts.content + weights.kl * parts.kl +
         weights.image_recon * parts.image_recon + weights.prior_recon * parts.prior_recon +
         weights.physical * parts.physical + weights.smooth * parts.smooth +
         weights.intensity * parts.intensity;
}

}  // namespace lidint
