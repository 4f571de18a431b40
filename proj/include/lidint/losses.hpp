#pragma once

#include <span>
#include <vector>

#include "lidint/image.hpp"

namespace lidint {

// Floor applied to albedo before taking logs in the smoothness term.
inline constexpr double kLogFloor = 1e-4;
// Floor applied to LiDAR intensity inside the luminance/intensity ratio.
inline constexpr double kIntensityRatioFloor = 1e-3;

/// Weights of the seven loss terms in the total objective.
/// Order: content, KL, image recon, prior recon, physical, smooth, intensity.
struct LossWeights {
  double content = 10.0;
  double kl = 0.1;
  double image_recon = 10.0;
  double prior_recon = 0.1;
  double physical = 5.0;
  double smooth = 1.0;
  double intensity = 20.0;

  void validate() const;
};

enum class Connectivity { four = 4, eight = 8 };

/// Bandwidths of the edge-aware affinity kernel over pixel features.
struct AffinityConfig {
  Connectivity neighborhood = Connectivity::four;
  double sigma_pos = 0.1;     // normalized image units
  double sigma_lum = 0.1;
  double sigma_chroma = 0.05;

  void validate() const;
};

/// Per-pixel feature: normalized position, luminance, (r, g) chromaticity.
struct FeatureVector {
  double x = 0.0;
  double y = 0.0;
  double lum = 0.0;
  double r = 0.0;
  double g = 0.0;
};

/// Affine calibrations tying albedo luminance to LiDAR intensity (s1, b1)
/// and shade to the image/intensity ratio (s2, b2). Slopes are kept
/// non-negative: reflectance and return strength correlate positively.
struct ScaleBias {
  double s1 = 1.0;
  double b1 = 0.0;
  double s2 = 1.0;
  double b2 = 0.0;
};

/// Externally produced encoder/discriminator outputs consumed by the
/// representation losses. The networks themselves live elsewhere; these
/// operations only evaluate the arithmetic.
struct LatentBundle {
  std::vector<double> content_input;   // c_I
  std::vector<double> content_albedo;  // c_R(I)
  std::vector<double> content_shade;   // c_S(I)
  // Sampled log-densities for the prior-matching expectations.
  std::vector<double> logp_albedo;
  std::vector<double> logq_albedo;
  std::vector<double> logp_shade;
  std::vector<double> logq_shade;
  // Discriminator scores, expected strictly inside (0, 1).
  std::vector<double> albedo_fake_scores;
  std::vector<double> albedo_real_scores;
  std::vector<double> shade_fake_scores;
  std::vector<double> shade_real_scores;
};

/// Mean over pixels and channels of |I - R*S| with S broadcast per channel.
double physical_loss(const LinearImage& image, const LinearImage& albedo, const GrayMap& shade);

/// Gaussian affinity between two feature vectors under diagonal bandwidths.
double affinity(const FeatureVector& fi, const FeatureVector& fj, const AffinityConfig& cfg);

/// Features of every pixel of an image, in row-major order.
std::vector<FeatureVector> build_features(const LinearImage& img);

/// Visits every undirected neighbor pair (i, j) exactly once, row-major:
/// right and down, plus the two down-diagonals under 8-connectivity.
template <typename Fn>
void for_each_neighbor_pair(int width, int height, Connectivity conn, Fn&& fn) {
  const bool diag = conn == Connectivity::eight;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      if (x + 1 < width) fn(p, p + 1);
      if (y + 1 < height) fn(p, p + width);
      if (diag && y + 1 < height) {
        if (x + 1 < width) fn(p, p + width + 1);
        if (x > 0) fn(p, p + width - 1);
      }
    }
  }
}

/// Edge-aware L1 smoothness of log-albedo, affinities computed from `image`,
/// summed over undirected neighbor pairs, normalized by pixel count.
double smooth_loss(const LinearImage& albedo, const LinearImage& image, const AffinityConfig& cfg);

/// Masked mean of |F(R) - s1*L - b1| + |F(S) - s2*(F(I)/L) - b2|.
double intensity_consistency_loss(const LinearImage& image, const LinearImage& albedo,
                                  const GrayMap& shade, const GrayMap& lidar, const MaskMap& mask,
                                  const ScaleBias& sb);

/// Result of the closed-form affine fit. `degenerate` flags a constant
/// source, in which case s = 0 and b is the masked target mean.
struct ScaleBiasFit {
  double s = 0.0;
  double b = 0.0;
  bool degenerate = false;
};

/// Least-squares fit of target = s*source + b over masked pixels, slope
/// clamped to s >= 0. Requires at least two masked pixels.
ScaleBiasFit fit_scale_bias(const GrayMap& target, const GrayMap& source, const MaskMap& mask);

/// mean |c_R - c_I| + mean |c_S - c_I| over the latent content codes.
double content_loss(const LatentBundle& bundle);

/// Monte-Carlo estimate of the two prior-matching KL expectations.
double kl_loss(std::span<const double> logp_albedo, std::span<const double> logq_albedo,
               std::span<const double> logp_shade, std::span<const double> logq_shade);
double kl_loss(const LatentBundle& bundle);

/// Sum over the three domains of the mean absolute reconstruction error.
double image_recon_loss(std::span<const double> recon_input, std::span<const double> input,
                        std::span<const double> recon_albedo, std::span<const double> albedo,
                        std::span<const double> recon_shade, std::span<const double> shade);

/// Same contract as image_recon_loss, over recovered prior codes.
double prior_recon_loss(std::span<const double> recovered_input, std::span<const double> input,
                        std::span<const double> recovered_albedo, std::span<const double> albedo,
                        std::span<const double> recovered_shade, std::span<const double> shade);

/// mean log(1-D_R(fake)) + mean log(D_R(real)) + same for the shade
/// discriminator; scores clamped into [1e-7, 1-1e-7] before the logs.
double adversarial_loss(std::span<const double> albedo_fake_scores,
                        std::span<const double> albedo_real_scores,
                        std::span<const double> shade_fake_scores,
                        std::span<const double> shade_real_scores);
double adversarial_loss(const LatentBundle& bundle);

/// The seven evaluated loss terms, ready for weighting.
struct LossParts {
  double adversarial = 0.0;
  double content = 0.0;
  double kl = 0.0;
  double image_recon = 0.0;
  double prior_recon = 0.0;
  double physical = 0.0;
  double smooth = 0.0;
  double intensity = 0.0;
};

/// adv + l1*cnt + l2*kl + l3*img + l4*pri + l5*phy + l6*smooth + l7*int.
double total_objective(const LossParts& parts, const LossWeights& weights);

}  // namespace lidint
