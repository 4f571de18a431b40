#include "lidint/densify.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidint/cg.hpp"
#include "lidint/rng.hpp"

namespace lidint {

SparseIntensity::SparseIntensity(GrayMap v, MaskMap m)
    : values(std::move(v)), mask(std::move(m)) {
  require_same_shape(values.width, values.height, mask.width, mask.height, "SparseIntensity");
  for (std::size_t p = 0; p < mask.on.size(); ++p) {
    if (!mask.on[p]) continue;
    const double x = values.data[p];
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
      throw ValidationError("SparseIntensity: observed value " + std::to_string(x) +
                            " outside [0, 1]");
    }
  }
}

void DensifyParams::validate() const {
  if (!(lambda_reg > 0.0)) throw ValidationError("DensifyParams: lambda_reg must be > 0");
  if (!(sigma_rgb > 0.0)) throw ValidationError("DensifyParams: sigma_rgb must be > 0");
  if (max_iters < 1) throw ValidationError("DensifyParams: max_iters must be >= 1");
  if (!(tol > 0.0)) throw ValidationError("DensifyParams: tol must be > 0");
}

EdgeWeights affinity_weights(const LinearImage& img, double sigma_rgb) {
  if (!(sigma_rgb > 0.0)) throw ValidationError("affinity_weights: sigma_rgb must be > 0");
  EdgeWeights w;
  w.width = img.width;
  w.height = img.height;
  w.horizontal.resize(static_cast<std::size_t>(img.width - 1) * img.height);
  w.vertical.resize(static_cast<std::size_t>(img.width) * (img.height - 1));
  const double inv = 1.0 / (2.0 * sigma_rgb * sigma_rgb);
  auto color_weight = [&](std::size_t p, std::size_t q) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = img.data[p * 3 + c] - img.data[q * 3 + c];
      d2 += d * d;
    }
    return std::exp(-d2 * inv);
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x + 1 < img.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * img.width + x;
      w.horizontal[static_cast<std::size_t>(y) * (img.width - 1) + x] = color_weight(p, p + 1);
    }
  }
  for (int y = 0; y + 1 < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * img.width + x;
      w.vertical[p] = color_weight(p, p + img.width);
    }
  }
  return w;
}

DensifyResult densify(const LinearImage& img, const SparseIntensity& sparse,
                      const DensifyParams& params) {
  params.validate();
  require_same_shape(img.width, img.height, sparse.values.width, sparse.values.height, "densify");
  if (sparse.mask.count_on() == 0) throw EmptyMaskError("densify: no observed pixels");

  const int W = img.width;
  const int H = img.height;
  const std::size_t n = sparse.values.pixel_count();
  const EdgeWeights w = affinity_weights(img, params.sigma_rgb);
  const double lambda = params.lambda_reg;

  // Normal equations of the quadratic: (M + lambda*L_w) x = M x0, where M is
  // the observation mask and L_w the weighted 4-connected graph Laplacian.
  std::vector<double> diag(n, 0.0);
  std::vector<double> b(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    if (sparse.mask.on[p]) {
      diag[p] += 1.0;
      b[p] = sparse.values.data[p];
    }
  }
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x + 1 < W; ++x) {
      const double we = lambda * w.horizontal[static_cast<std::size_t>(y) * (W - 1) + x];
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      diag[p] += we;
      diag[p + 1] += we;
    }
  }
  for (int y = 0; y + 1 < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const double we = lambda * w.vertical[p];
      diag[p] += we;
      diag[p + W] += we;
    }
  }

  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t p = 0; p < n; ++p) out[p] = sparse.mask.on[p] ? x[p] : 0.0;
    for (int y = 0; y < H; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * W;
      for (int xi = 0; xi + 1 < W; ++xi) {
        const double we = lambda * w.horizontal[static_cast<std::size_t>(y) * (W - 1) + xi];
        const double d = x[row + xi] - x[row + xi + 1];
        out[row + xi] += we * d;
        out[row + xi + 1] -= we * d;
      }
    }
    for (int y = 0; y + 1 < H; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * W;
      for (int xi = 0; xi < W; ++xi) {
        const double we = lambda * w.vertical[row + xi];
        const double d = x[row + xi] - x[row + xi + W];
        out[row + xi] += we * d;
        out[row + xi + W] -= we * d;
      }
    }
  };

  std::vector<double> x;
  const CgResult cg = conjugate_gradient(apply, diag, b, x, params.max_iters, params.tol);
  if (!cg.converged && cg.relative_residual > 10.0 * params.tol) {
    throw NonConvergenceError("densify: CG stopped at relative residual " +
                                  std::to_string(cg.relative_residual) + " after " +
                                  std::to_string(cg.iterations) + " iterations",
                              cg.relative_residual);
  }

  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  DensifyResult result;
  result.values = GrayMap(W, H, std::move(x));
  result.observed = sparse.mask;
  result.iterations = cg.iterations;
  result.relative_residual = cg.relative_residual;
  return result;
}

SparseIntensity subsample_mask(const SparseIntensity& sparse, double keep_fraction,
                               std::uint64_t seed) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw ValidationError("subsample_mask: keep_fraction must be in (0, 1]");
  }
  Rng rng(seed);
  GrayMap values = sparse.values;
  std::vector<std::uint8_t> flags(sparse.mask.on.size(), 0);
  for (std::size_t p = 0; p < flags.size(); ++p) {
    if (!sparse.mask.on[p]) continue;
    if (rng.uniform() < keep_fraction) {
      flags[p] = 1;
    } else {
      values.data[p] = 0.0;
    }
  }
  return SparseIntensity(std::move(values),
                         MaskMap(sparse.mask.width, sparse.mask.height, std::move(flags)));
}

}  // namespace lidint
