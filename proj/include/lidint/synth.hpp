#pragma once

#include <cstdint>
#include <vector>

#include "lidint/densify.hpp"
#include "lidint/image.hpp"

namespace lidint {

/// Scene generator knobs. Albedo is a Voronoi partition of constant chromatic
/// colors, shade a smooth cosine-bump field, optionally cut by a half-plane
/// cast shadow. LiDAR intensity tracks albedo luminance (shadow-free) with
/// multiplicative Gaussian noise on a Bernoulli mask.
struct SynthParams {
  int n_regions = 8;
  double shade_smoothness = 1.0;  // larger = lower-frequency shade
  bool shadow = true;
  double shadow_factor = 0.35;
  double noise_sigma = 0.0;
  double lidar_density = 0.5;
  // Saturation bands mimic natural over/under-exposed image areas (sky,
  // deep shadow). Fractions of image height; zero disables them.
  double saturated_band = 0.0;
  double dark_band = 0.0;

  void validate() const;
};

/// Half-plane cast shadow: pixels with nx*x + ny*y < offset are shadowed.
struct ShadowLine {
  bool present = false;
  double nx = 0.0;
  double ny = 0.0;
  double offset = 0.0;
  double factor = 1.0;

  bool shadowed(double x, double y) const { return present && nx * x + ny * y < offset; }
};

struct SynthScene {
  LinearImage image;     // I = R* x S*
  LinearImage albedo;    // ground truth R*
  GrayMap shade;         // ground truth S*
  SparseIntensity lidar;
  std::vector<int> region_ids;  // Voronoi label per pixel
  ShadowLine shadow;
  std::uint64_t seed = 0;
};

SynthScene synth_scene(std::uint64_t seed, int width, int height,
                       const SynthParams& params = SynthParams());

/// FNV-1a over the bit patterns of every array in the scene; regression
/// fixture for generator stability.
std::uint64_t scene_content_hash(const SynthScene& scene);

}  // namespace lidint
