#include "lidint/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lidint/cg.hpp"

namespace lidint {

namespace {

constexpr double kLumaWeights[3] = {kLumaR, kLumaG, kLumaB};
const double kLogOfFloor = std::log(kLogFloor);

inline double huber(double t, double delta) {
  const double a = std::abs(t);
  return a <= delta ? t * t / (2.0 * delta) : a - 0.5 * delta;
}

inline double huber_deriv(double t, double delta) {
  if (t > delta) return 1.0;
  if (t < -delta) return -1.0;
  return t / delta;
}

}  // namespace

void SolverConfig::validate() const {
  weights.validate();
  affinity.validate();
  if (max_outer < 1 || max_inner < 1) {
    throw ValidationError("SolverConfig: iteration counts must be >= 1");
  }
  if (!(armijo > 0.0) || !(grad_tol > 0.0) || !(huber_delta > 0.0)) {
    throw ValidationError("SolverConfig: armijo, grad_tol and huber_delta must be > 0");
  }
  if (!(shade_cap >= 1.0)) throw ValidationError("SolverConfig: shade_cap must be >= 1");
}

DecomposeProblem::DecomposeProblem(const LinearImage& image, const GrayMap& lidar,
                                   const MaskMap& mask, SolverConfig cfg)
    : image_(image), lidar_(lidar), mask_(mask), cfg_(std::move(cfg)) {
  // Inputs are copied: the problem is self-contained and safe to keep around.
  cfg_.validate();
  require_same_shape(image.width, image.height, lidar.width, lidar.height, "decompose");
  require_same_shape(image.width, image.height, mask.width, mask.height, "decompose");

  const std::vector<FeatureVector> features = build_features(image);
  edges_.reserve(image.pixel_count() * 2);
  for_each_neighbor_pair(image.width, image.height, cfg_.affinity.neighborhood,
                         [&](std::size_t i, std::size_t j) {
                           edges_.push_back({static_cast<std::uint32_t>(i),
                                             static_cast<std::uint32_t>(j),
                                             affinity(features[i], features[j], cfg_.affinity)});
                         });

  const std::size_t n = image.pixel_count();
  log_image_.resize(n * 3);
  for (std::size_t i = 0; i < n * 3; ++i) {
    log_image_[i] = image.data[i] > 0.0 ? std::log(image.data[i])
                                        : -std::numeric_limits<double>::infinity();
  }

  lum_image_ = luminance(image);
  ratio_.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    ratio_[p] = lum_image_.data[p] / std::max(lidar.data[p], kIntensityRatioFloor);
  }

  masked_.reserve(mask.count_on());
  for (std::size_t p = 0; p < n; ++p) {
    if (mask.on[p]) masked_.push_back(static_cast<std::uint32_t>(p));
  }
  if (masked_.empty() && cfg_.weights.intensity > 0.0) {
    throw EmptyMaskError("decompose: intensity term enabled but mask is empty");
  }

  // Shade must cover the brightest channel so albedo stays at or below one.
  floor_ = GrayMap::zeros(image.width, image.height);
  for (std::size_t p = 0; p < n; ++p) {
    const double m =
        std::max({image.data[p * 3], image.data[p * 3 + 1], image.data[p * 3 + 2], kLogFloor});
    floor_.data[p] = std::log(m);
  }
}

double DecomposeProblem::objective(const GrayMap& u, const ScaleBias& sb) const {
  const std::size_t n = image_.pixel_count();
  const double delta = cfg_.huber_delta;
  double total = 0.0;

  if (cfg_.weights.smooth > 0.0) {
    double sum = 0.0;
    for (const Edge& e : edges_) {
      double l1 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double ai =
            std::clamp(log_image_[e.a * 3 + c] - u.data[e.a], kLogOfFloor, 0.0);
        const double aj =
            std::clamp(log_image_[e.b * 3 + c] - u.data[e.b], kLogOfFloor, 0.0);
        l1 += huber(ai - aj, delta);
      }
      sum += e.v * l1;
    }
    total += cfg_.weights.smooth * sum / static_cast<double>(n);
  }

  if (cfg_.weights.intensity > 0.0) {
    double sum = 0.0;
    for (std::uint32_t p : masked_) {
      const double up = u.data[p];
      double lum_albedo = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double a = std::clamp(log_image_[p * 3 + c] - up, kLogOfFloor, 0.0);
        lum_albedo += kLumaWeights[c] * std::exp(a);
      }
      const double r1 = lum_albedo - sb.s1 * lidar_.data[p] - sb.b1;
      const double r2 = std::exp(up) - sb.s2 * ratio_[p] - sb.b2;
      sum += huber(r1, delta) + huber(r2, delta);
    }
    total += cfg_.weights.intensity * sum / static_cast<double>(masked_.size());
  }

  if (!std::isfinite(total)) {
    throw NonFiniteError("decompose: objective evaluated to a non-finite value");
  }
  return total;
}

GrayMap DecomposeProblem::gradient(const GrayMap& u, const ScaleBias& sb) const {
  GrayMap g, h;
  gradient_and_curvature(u, sb, g, h);
  return g;
}

void DecomposeProblem::gradient_and_curvature(const GrayMap& u, const ScaleBias& sb, GrayMap& g,
                                              GrayMap& h) const {
  const std::size_t n = image_.pixel_count();
  const double delta = cfg_.huber_delta;
  g = GrayMap::zeros(image_.width, image_.height);
  h = GrayMap::zeros(image_.width, image_.height);

  if (cfg_.weights.smooth > 0.0) {
    const double scale = cfg_.weights.smooth / static_cast<double>(n);
    for (const Edge& e : edges_) {
      for (int c = 0; c < 3; ++c) {
        const double ti = log_image_[e.a * 3 + c] - u.data[e.a];
        const double tj = log_image_[e.b * 3 + c] - u.data[e.b];
        const double ai = std::clamp(ti, kLogOfFloor, 0.0);
        const double aj = std::clamp(tj, kLogOfFloor, 0.0);
        const double t = ai - aj;
        const double psi = scale * e.v * huber_deriv(t, delta);
        const double curv = std::abs(t) <= delta ? scale * e.v / delta : 0.0;
        // d(ai)/du_a is -1 only while the albedo clamp is inactive.
        if (ti > kLogOfFloor && ti < 0.0) {
          g.data[e.a] -= psi;
          h.data[e.a] += curv;
        }
        if (tj > kLogOfFloor && tj < 0.0) {
          g.data[e.b] += psi;
          h.data[e.b] += curv;
        }
      }
    }
  }

  if (cfg_.weights.intensity > 0.0) {
    const double scale = cfg_.weights.intensity / static_cast<double>(masked_.size());
    for (std::uint32_t p : masked_) {
      const double up = u.data[p];
      double lum_albedo = 0.0;
      double dlum = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double t = log_image_[p * 3 + c] - up;
        const double a = std::clamp(t, kLogOfFloor, 0.0);
        const double r = std::exp(a);
        lum_albedo += kLumaWeights[c] * r;
        if (t > kLogOfFloor && t < 0.0) dlum -= kLumaWeights[c] * r;
      }
      const double r1 = lum_albedo - sb.s1 * lidar_.data[p] - sb.b1;
      const double s = std::exp(up);
      const double r2 = s - sb.s2 * ratio_[p] - sb.b2;
      const double psi1 = huber_deriv(r1, delta);
      const double psi2 = huber_deriv(r2, delta);
      g.data[p] += scale * (psi1 * dlum + psi2 * s);
      double curv = 0.0;
      if (std::abs(r1) <= delta) curv += dlum * dlum / delta;
      if (std::abs(r2) <= delta) curv += s * s / delta;
      curv += std::max(psi1 * (-dlum), 0.0) + std::max(psi2 * s, 0.0);
      h.data[p] += scale * curv;
    }
  }
}

ScaleBias DecomposeProblem::refit(const GrayMap& u) const {
  ScaleBias sb;
  if (masked_.empty()) return sb;

  GrayMap lum_albedo = GrayMap::zeros(image_.width, image_.height);
  GrayMap shade = GrayMap::zeros(image_.width, image_.height);
  GrayMap ratio = GrayMap::zeros(image_.width, image_.height);
  for (std::uint32_t p : masked_) {
    double f = 0.0;
    for (int c = 0; c < 3; ++c) {
      f += kLumaWeights[c] *
           std::exp(std::clamp(log_image_[p * 3 + c] - u.data[p], kLogOfFloor, 0.0));
    }
    lum_albedo.data[p] = f;
    shade.data[p] = std::exp(u.data[p]);
    ratio.data[p] = ratio_[p];
  }
  if (masked_.size() == 1) {
    const std::uint32_t p = masked_[0];
    return {0.0, lum_albedo.data[p], 0.0, shade.data[p]};
  }
  const ScaleBiasFit fit1 = fit_scale_bias(lum_albedo, lidar_, mask_);
  const ScaleBiasFit fit2 = fit_scale_bias(shade, ratio, mask_);
  return {fit1.s, fit1.b, fit2.s, fit2.b};
}

GrayMap DecomposeProblem::initial_log_shade() const {
  GrayMap u = GrayMap::zeros(image_.width, image_.height);
  if (cfg_.init == ShadeInit::luminance) {
    for (std::size_t p = 0; p < u.data.size(); ++p) {
      u.data[p] = std::log(std::max(lum_image_.data[p], kLogFloor));
    }
  }
  project(u);
  return u;
}

void DecomposeProblem::project(GrayMap& u) const {
  const double hi = std::log(cfg_.shade_cap);
  for (std::size_t p = 0; p < u.data.size(); ++p) {
    u.data[p] = std::clamp(u.data[p], floor_.data[p], hi);
  }
}

Decomposition DecomposeProblem::assemble(const GrayMap& u, const ScaleBias& sb) const {
  const std::size_t n = image_.pixel_count();
  std::vector<double> shade(n);
  std::vector<double> albedo(n * 3);
  for (std::size_t p = 0; p < n; ++p) {
    const double s = std::exp(u.data[p]);
    shade[p] = s;
    for (int c = 0; c < 3; ++c) {
      albedo[p * 3 + c] = std::min(image_.data[p * 3 + c] / s, 1.0);
    }
  }
  Decomposition d;
  d.albedo = LinearImage(image_.width, image_.height, std::move(albedo));
  d.shade = GrayMap(image_.width, image_.height, std::move(shade));
  d.scale_bias = sb;
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double err =
          std::abs(image_.data[p * 3 + c] - d.albedo.data[p * 3 + c] * d.shade.data[p]);
      if (err > 1e-6) {
        throw NonFiniteError("decompose: reconstruction identity violated (" +
                             std::to_string(err) + ")");
      }
    }
  }
  return d;
}

Decomposition DecomposeProblem::solve() const {
  GrayMap u = initial_log_shade();
  // The first refit waits until after one descent round: at a constant shade
  // init the closed-form fit of the shade term degenerates to slope zero,
  // which would anchor the shade at its starting value.
  ScaleBias sb;
  double energy = objective(u, sb);

  GrayMap best_u = u;
  ScaleBias best_sb = sb;
  double best_energy = energy;
  const double hi = std::log(cfg_.shade_cap);
  double alpha_start = 1.0;

  for (std::size_t outer = 0; outer < cfg_.max_outer; ++outer) {
    const double energy_at_outer_start = energy;

    // Pixels whose residuals sit inside the Huber zone carry curvature 1/delta
    // and would throttle a uniform step to nothing; a Jacobi-scaled direction
    // lets the still-moving pixels take full-size steps.
    const double h_floor =
        cfg_.weights.smooth * 6.0 / static_cast<double>(u.data.size()) +
        (masked_.empty() ? 0.0
                         : cfg_.weights.intensity * 2.0 / static_cast<double>(masked_.size()));
    GrayMap g, h;
    for (std::size_t inner = 0; inner < cfg_.max_inner; ++inner) {
      gradient_and_curvature(u, sb, g, h);

      double stationarity = 0.0;
      for (std::size_t p = 0; p < u.data.size(); ++p) {
        double gp = g.data[p];
        if (u.data[p] <= floor_.data[p] && gp > 0.0) gp = 0.0;
        if (u.data[p] >= hi && gp < 0.0) gp = 0.0;
        stationarity = std::max(stationarity, std::abs(gp));
      }
      if (stationarity <= cfg_.grad_tol) break;

      bool accepted = false;
      double alpha = alpha_start;
      GrayMap trial = u;
      for (int bt = 0; bt < 60 && !accepted; ++bt) {
        for (std::size_t p = 0; p < u.data.size(); ++p) {
          const double step = g.data[p] / (h.data[p] + h_floor);
          trial.data[p] = std::clamp(u.data[p] - alpha * step, floor_.data[p], hi);
        }
        double decrease_ref = 0.0;
        for (std::size_t p = 0; p < u.data.size(); ++p) {
          decrease_ref += g.data[p] * (u.data[p] - trial.data[p]);
        }
        if (decrease_ref > 0.0) {
          const double trial_energy = objective(trial, sb);
          if (trial_energy <= energy - cfg_.armijo * decrease_ref) {
            u = trial;
            energy = trial_energy;
            alpha_start = std::min(alpha * 2.0, 64.0);
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      if (energy < best_energy) {
        best_energy = energy;
        best_u = u;
        best_sb = sb;
      }
    }

    // Refit is kept only when it does not increase the Huberized energy; the
    // least-squares fit optimizes the squared residuals, not the L1 ones.
    const ScaleBias refit_sb = refit(u);
    const double refit_energy = objective(u, refit_sb);
    if (refit_energy <= energy) {
      sb = refit_sb;
      energy = refit_energy;
      if (energy < best_energy) {
        best_energy = energy;
        best_u = u;
        best_sb = sb;
      }
    }

    if (energy_at_outer_start - energy <= 1e-12 * std::max(1.0, std::abs(energy))) break;
  }

  return assemble(best_u, best_sb);
}

Decomposition decompose(const LinearImage& image, const GrayMap& lidar, const MaskMap& mask,
                        const SolverConfig& cfg) {
  return DecomposeProblem(image, lidar, mask, cfg).solve();
}

Decomposition baseline_r(const LinearImage& image) {
  Decomposition d;
  d.albedo = LinearImage::constant(image.width, image.height, 1.0, 1.0, 1.0);
  d.shade = luminance(image);
  return d;
}

Decomposition baseline_s(const LinearImage& image) {
  Decomposition d;
  d.albedo = image;
  d.shade = GrayMap::constant(image.width, image.height, 1.0);
  return d;
}

Decomposition retinex(const LinearImage& image, const RetinexParams& params) {
  if (!(params.threshold > 0.0)) throw ValidationError("retinex: threshold must be > 0");
  const std::size_t n = image.pixel_count();
  const GrayMap lum = luminance(image);
  const ChromaMap chroma = chromaticity(image);

  std::vector<double> log_lum(n);
  for (std::size_t p = 0; p < n; ++p) log_lum[p] = std::log(std::max(lum.data[p], 1e-6));

  // Albedo-attributed gradient field over the 4-connected edges, then a
  // Poisson solve to integrate it back into log albedo luminance.
  struct Edge {
    std::uint32_t a;
    std::uint32_t b;
    double g;
  };
  std::vector<Edge> edges;
  edges.reserve(n * 2);
  for_each_neighbor_pair(image.width, image.height, Connectivity::four,
                         [&](std::size_t i, std::size_t j) {
                           const double d = log_lum[j] - log_lum[i];
                           bool albedo_edge = std::abs(d) > params.threshold;
                           if (!albedo_edge && params.use_color) {
                             const double dr = chroma.data[j * 2] - chroma.data[i * 2];
                             const double dg = chroma.data[j * 2 + 1] - chroma.data[i * 2 + 1];
                             albedo_edge = std::sqrt(dr * dr + dg * dg) > params.color_threshold;
                           }
                           edges.push_back({static_cast<std::uint32_t>(i),
                                            static_cast<std::uint32_t>(j),
                                            albedo_edge ? d : 0.0});
                         });

  std::vector<double> b(n, 0.0);
  std::vector<double> degree(n, 0.0);
  for (const Edge& e : edges) {
    b[e.b] += e.g;
    b[e.a] -= e.g;
    degree[e.a] += 1.0;
    degree[e.b] += 1.0;
  }
  double bmean = 0.0;
  for (double v : b) bmean += v;
  bmean /= static_cast<double>(n);
  for (double& v : b) v -= bmean;

  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (const Edge& e : edges) {
      const double d = x[e.a] - x[e.b];
      out[e.a] += d;
      out[e.b] -= d;
    }
  };
  std::vector<double> rho;
  conjugate_gradient(apply, degree, b, rho, params.max_iters, params.tol);

  // Gauge: align mean log albedo with mean log luminance so shade sits near 1.
  double shift = 0.0;
  for (std::size_t p = 0; p < n; ++p) shift += log_lum[p] - rho[p];
  shift /= static_cast<double>(n);

  std::vector<double> shade(n);
  std::vector<double> albedo(n * 3);
  for (std::size_t p = 0; p < n; ++p) {
    const double s = std::exp(log_lum[p] - rho[p] - shift);
    shade[p] = s;
    for (int c = 0; c < 3; ++c) {
      albedo[p * 3 + c] = s > 0.0 ? std::min(image.data[p * 3 + c] / s, 1.0) : 1.0;
    }
  }
  Decomposition d;
  d.albedo = LinearImage(image.width, image.height, std::move(albedo));
  d.shade = GrayMap(image.width, image.height, std::move(shade));
  return d;
}

}  // namespace lidint
