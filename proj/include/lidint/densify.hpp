#pragma once

#include <cstdint>
#include <vector>

#include "lidint/image.hpp"

namespace lidint {

/// Sparse per-pixel LiDAR intensity: values are meaningful only where the
/// mask is set. Observed values must be finite and in [0, 1].
struct SparseIntensity {
  GrayMap values;
  MaskMap mask;

  SparseIntensity() = default;
  SparseIntensity(GrayMap v, MaskMap m);
};

/// Knobs of the densification solve.
struct DensifyParams {
  double lambda_reg = 1.0;   // weight of the edge-aware smoothness term
  double sigma_rgb = 0.1;    // RGB similarity bandwidth of the edge weights
  std::size_t max_iters = 2000;
  double tol = 1e-8;         // relative residual target

  void validate() const;
};

/// Gaussian similarity over the 4-connected pixel graph of an image.
/// horizontal[y*(W-1)+x] links (x,y)-(x+1,y); vertical[y*W+x] links
/// (x,y)-(x,y+1). Weights are in (0, 1] but may underflow to 0 for extreme
/// color differences; consumers must tolerate that.
struct EdgeWeights {
  int width = 0;
  int height = 0;
  std::vector<double> horizontal;
  std::vector<double> vertical;
};

EdgeWeights affinity_weights(const LinearImage& img, double sigma_rgb);

/// Dense intensity together with the original observation mask, which
/// callers keep for loss masking decisions.
struct DensifyResult {
  GrayMap values;
  MaskMap observed;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Fills unobserved intensity by minimizing the masked data term plus an
/// RGB-edge-aware quadratic smoothness term, solved with Jacobi-preconditioned
/// conjugate gradient. Output clamped to [0, 1].
///
/// Throws EmptyMaskError when nothing is observed and NonConvergenceError
/// when the iteration cap is reached with a residual above 10x tol.
DensifyResult densify(const LinearImage& img, const SparseIntensity& sparse,
                      const DensifyParams& params = DensifyParams());

/// Keeps each observed pixel independently with probability keep_fraction.
/// Deterministic for a fixed seed; dropped pixels are zeroed.
SparseIntensity subsample_mask(const SparseIntensity& sparse, double keep_fraction,
                               std::uint64_t seed);

}  // namespace lidint
