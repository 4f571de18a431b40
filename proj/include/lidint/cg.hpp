#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace lidint {

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradient for symmetric positive
/// (semi-)definite operators. `apply(x, out)` must write A*x into out.
/// Stops when ||b - A*x|| <= tol * ||b||. Deterministic: plain sequential
/// loops, no reduction reordering.
template <typename ApplyFn>
CgResult conjugate_gradient(const ApplyFn& apply, const std::vector<double>& diag,
                            const std::vector<double>& b, std::vector<double>& x,
                            std::size_t max_iters, double tol) {
  const std::size_t n = b.size();
  x.assign(n, 0.0);

  double bnorm2 = 0.0;
  for (double v : b) bnorm2 += v * v;
  CgResult res;
  if (bnorm2 == 0.0) {
    res.converged = true;
    return res;
  }
  const double bnorm = std::sqrt(bnorm2);

  std::vector<double> r = b;
  std::vector<double> z(n), p(n), ap(n);
  std::vector<double> inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_diag[i] = diag[i] > 1e-300 ? 1.0 / diag[i] : 0.0;
  }

  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = inv_diag[i] * r[i];
    p[i] = z[i];
    rz += r[i] * z[i];
  }

  double rnorm = bnorm;
  for (std::size_t it = 0; it < max_iters; ++it) {
    apply(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (pap <= 0.0) break;  // numerically singular direction; x is best effort
    const double alpha = rz / pap;
    double rnorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rnorm2 += r[i] * r[i];
    }
    rnorm = std::sqrt(rnorm2);
    res.iterations = it + 1;
    if (rnorm <= tol * bnorm) {
      res.converged = true;
      break;
    }
    double rz_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = inv_diag[i] * r[i];
      rz_next += r[i] * z[i];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.relative_residual = rnorm / bnorm;
  return res;
}

}  // namespace lidint
