#include "lidint/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "lidint/rng.hpp"

namespace lidint {

void SynthParams::validate() const {
  if (n_regions < 1) throw ValidationError("SynthParams: n_regions must be >= 1");
  if (!(shade_smoothness > 0.0)) throw ValidationError("SynthParams: shade_smoothness must be > 0");
  if (!(shadow_factor > 0.0) || shadow_factor > 1.0) {
    throw ValidationError("SynthParams: shadow_factor must be in (0, 1]");
  }
  if (noise_sigma < 0.0) throw ValidationError("SynthParams: noise_sigma must be >= 0");
  if (!(lidar_density > 0.0) || lidar_density > 1.0) {
    throw ValidationError("SynthParams: lidar_density must be in (0, 1]");
  }
  if (saturated_band < 0.0 || dark_band < 0.0 || saturated_band + dark_band > 0.8) {
    throw ValidationError("SynthParams: band fractions must be >= 0 and sum below 0.8");
  }
}

SynthScene synth_scene(std::uint64_t seed, int width, int height, const SynthParams& params) {
  params.validate();
  if (width < 2 || height < 2) throw ValidationError("synth_scene: size must be >= 2x2");
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(width) * height;

  // Voronoi albedo: seeded sites with constant chromatic colors per cell.
  struct Site {
    double x, y;
  };
  std::vector<Site> site_pos(params.n_regions);
  for (auto& s : site_pos) {
    s.x = rng.uniform(0.0, width);
    s.y = rng.uniform(0.0, height);
  }
  std::vector<std::array<double, 3>> colors(params.n_regions);
  for (auto& c : colors) {
    c = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
  }

  // Shade: three low-frequency cosine bumps, min-max normalized to [0.2, 1].
  struct Bump {
    double amp, freq, dirx, diry, phase;
  };
  Bump bumps[3];
  for (Bump& b : bumps) {
    b.amp = rng.uniform(0.5, 1.0);
    b.freq = rng.uniform(0.5, 1.5) / params.shade_smoothness;
    const double ang = rng.uniform(0.0, 6.28318530717958647692);
    b.dirx = std::cos(ang);
    b.diry = std::sin(ang);
    b.phase = rng.uniform(0.0, 6.28318530717958647692);
  }

  ShadowLine shadow;
  if (params.shadow) {
    shadow.present = true;
    const double ang = rng.uniform(0.0, 3.14159265358979323846);
    shadow.nx = std::cos(ang);
    shadow.ny = std::sin(ang);
    const double cx = width * (0.5 + rng.uniform(-0.15, 0.15));
    const double cy = height * (0.5 + rng.uniform(-0.15, 0.15));
    shadow.offset = shadow.nx * cx + shadow.ny * cy;
    shadow.factor = params.shadow_factor;
  }

  std::vector<int> region(n);
  std::vector<double> albedo(n * 3);
  std::vector<double> shade_raw(n);
  const int sat_rows = static_cast<int>(params.saturated_band * height);
  const int dark_rows = static_cast<int>(params.dark_band * height);

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      int best = 0;
      double best_d = 1e300;
      for (int s = 0; s < params.n_regions; ++s) {
        const double dx = x - site_pos[s].x;
        const double dy = y - site_pos[s].y;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      region[p] = best;
      for (int c = 0; c < 3; ++c) albedo[p * 3 + c] = colors[best][c];
      double s = 0.0;
      const double u = static_cast<double>(x) / (width - 1);
      const double v = static_cast<double>(y) / (height - 1);
      for (const Bump& b : bumps) {
        s += b.amp *
             std::cos(6.28318530717958647692 * b.freq * (b.dirx * u + b.diry * v) + b.phase);
      }
      shade_raw[p] = s;
    }
  }

  double smin = shade_raw[0], smax = shade_raw[0];
  for (double s : shade_raw) {
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  std::vector<double> shade(n);
  for (std::size_t p = 0; p < n; ++p) {
    shade[p] = smax > smin ? 0.2 + 0.8 * (shade_raw[p] - smin) / (smax - smin) : 0.6;
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      if (shadow.shadowed(x, y)) shade[p] *= shadow.factor;
    }
  }

  // Exposure bands: a blown-out top (sky-like) and a crushed bottom, used by
  // the annotation filters. Ground truth stays consistent inside them.
  for (int y = 0; y < height; ++y) {
    const bool saturated = y < sat_rows;
    const bool dark = y >= height - dark_rows;
    if (!saturated && !dark) continue;
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      if (saturated) {
        albedo[p * 3] = albedo[p * 3 + 1] = albedo[p * 3 + 2] = 1.0;
        shade[p] = 1.0;
      } else {
        albedo[p * 3] = albedo[p * 3 + 1] = albedo[p * 3 + 2] = 0.05;
        shade[p] = 0.2;
      }
    }
  }

  std::vector<double> image(n * 3);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      image[p * 3 + c] = std::clamp(albedo[p * 3 + c] * shade[p], 0.0, 1.0);
    }
  }

  SynthScene scene;
  scene.seed = seed;
  scene.albedo = LinearImage(width, height, std::move(albedo));
  scene.shade = GrayMap(width, height, std::move(shade));
  scene.image = LinearImage(width, height, std::move(image));
  scene.region_ids = std::move(region);
  scene.shadow = shadow;

  const GrayMap gt_lum = luminance(scene.albedo);
  std::vector<double> lidar(n, 0.0);
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    if (!rng.bernoulli(params.lidar_density)) continue;
    mask[p] = 1;
    double v = gt_lum.data[p];
    if (params.noise_sigma > 0.0) v *= 1.0 + params.noise_sigma * rng.gaussian();
    lidar[p] = std::clamp(v, 0.0, 1.0);
  }
  scene.lidar = SparseIntensity(GrayMap(width, height, std::move(lidar)),
                                MaskMap(width, height, std::move(mask)));
  return scene;
}

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t size) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t scene_content_hash(const SynthScene& scene) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_bytes(h, scene.image.data.data(), scene.image.data.size() * sizeof(double));
  hash_bytes(h, scene.albedo.data.data(), scene.albedo.data.size() * sizeof(double));
  hash_bytes(h, scene.shade.data.data(), scene.shade.data.size() * sizeof(double));
  hash_bytes(h, scene.lidar.values.data.data(), scene.lidar.values.data.size() * sizeof(double));
  hash_bytes(h, scene.lidar.mask.on.data(), scene.lidar.mask.on.size());
  return h;
}

}  // namespace lidint
