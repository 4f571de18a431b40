#pragma once

#include <cstdint>
#include <vector>

#include "lidint/image.hpp"
#include "lidint/losses.hpp"

namespace lidint {

/// Albedo/shade split of a linear image. The energy solver guarantees
/// R*S == I to 1e-6 (shade is single-channel and R is derived as I/S);
/// baseline constructions waive that identity.
struct Decomposition {
  LinearImage albedo;
  GrayMap shade;
  ScaleBias scale_bias;
};

enum class ShadeInit { constant, luminance };

struct SolverConfig {
  LossWeights weights;        // only smooth and intensity enter the objective
  AffinityConfig affinity;
  std::size_t max_outer = 10;   // scale/bias refit alternations
  std::size_t max_inner = 200;  // gradient steps per alternation
  double armijo = 1e-4;
  double grad_tol = 1e-6;
  ShadeInit init = ShadeInit::constant;
  // Working smoothing of the L1 terms. The objective stays within O(delta)
  // of the exact L1 energy; below ~1e-4 the 1/delta curvature throttles the
  // first-order steps so badly that desk-scale scenes stop converging.
  double huber_delta = 1e-2;
  double shade_cap = 8.0;  // log-shade upper bound, exp units

  void validate() const;
};

/// The decomposition energy over the log-shade field u, with albedo defined
/// pointwise as R = clamp(I / exp(u)). Holds the precomputed affinities,
/// log-image and intensity targets so objective/gradient evaluations are
/// cheap. Pure and reentrant once constructed.
class DecomposeProblem {
 public:
  DecomposeProblem(const LinearImage& image, const GrayMap& lidar, const MaskMap& mask,
                   SolverConfig cfg);

  /// Huber-smoothed energy: w_smooth * smooth(R(u)) + w_int * intensity(u, sb).
  double objective(const GrayMap& log_shade, const ScaleBias& sb) const;

  /// Analytic gradient of objective() with respect to the log-shade field.
  GrayMap gradient(const GrayMap& log_shade, const ScaleBias& sb) const;

  /// Gradient plus a positive diagonal curvature estimate (Gauss-Newton with
  /// the positive part of the second-order terms). The curvature scales the
  /// descent direction so pixels inside the stiff Huber zone stop throttling
  /// the step length of everything else.
  void gradient_and_curvature(const GrayMap& log_shade, const ScaleBias& sb, GrayMap& gradient,
                              GrayMap& curvature) const;

  /// Closed-form least-squares refit of the scale/bias calibrations at u.
  ScaleBias refit(const GrayMap& log_shade) const;

  GrayMap initial_log_shade() const;

  /// Clamps a log-shade field into the per-pixel feasible box (albedo in
  /// (0, 1], shade below the cap).
  void project(GrayMap& log_shade) const;

  Decomposition assemble(const GrayMap& log_shade, const ScaleBias& sb) const;

  /// Alternates sb refits with projected backtracking gradient descent and
  /// returns the best iterate seen. The accepted-step objective sequence is
  /// non-increasing.
  Decomposition solve() const;

  const SolverConfig& config() const { return cfg_; }
  const GrayMap& log_shade_floor() const { return floor_; }

 private:
  struct Edge {
    std::uint32_t a;
    std::uint32_t b;
    double v;
  };

  LinearImage image_;
  GrayMap lidar_;
  MaskMap mask_;
  SolverConfig cfg_;
  std::vector<Edge> edges_;
  std::vector<double> log_image_;   // log of per-channel values, -inf at zeros
  std::vector<double> ratio_;       // F(I) / max(L, floor)
  std::vector<std::uint32_t> masked_;
  GrayMap floor_;                   // per-pixel log-shade lower bound
  GrayMap lum_image_;
};

/// Convenience wrapper over DecomposeProblem::solve.
Decomposition decompose(const LinearImage& image, const GrayMap& lidar, const MaskMap& mask,
                        const SolverConfig& cfg = SolverConfig());

/// All-ones albedo; shade carries the whole image luminance.
Decomposition baseline_r(const LinearImage& image);

/// All-ones shade; albedo carries the whole image.
Decomposition baseline_s(const LinearImage& image);

struct RetinexParams {
  double threshold = 0.3;         // log-luminance gradient cutoff
  bool use_color = false;
  double color_threshold = 0.05;  // chromaticity gradient cutoff
  std::size_t max_iters = 10000;
  double tol = 1e-9;
};

/// Classic gradient-classification decomposition: log-luminance steps above
/// the threshold (or chroma steps, in the color variant) are attributed to
/// albedo, and log-albedo is rebuilt by a Poisson solve over the classified
/// gradient field.
Decomposition retinex(const LinearImage& image, const RetinexParams& params = RetinexParams());

}  // namespace lidint
