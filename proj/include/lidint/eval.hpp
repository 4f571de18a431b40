#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lidint/annotate.hpp"
#include "lidint/densify.hpp"
#include "lidint/image.hpp"

namespace lidint {

/// One scored method/dataset combination.
struct EvalReport {
  double whdr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::array<std::size_t, 3> counts{};  // annotated E/D/L counts
  double delta = 0.1;
  std::string method;
  std::string dataset;
};

/// Ratio-threshold judgement over an albedo luminance map; strict
/// inequalities at the 1+delta boundary. D means the first point is darker.
Judgement classify_lum_pair(const GrayMap& albedo_lum, const AnnotationPair& pair, double delta);

/// Same, computing the luminance of the albedo image first.
Judgement classify_pair(const LinearImage& albedo, const AnnotationPair& pair, double delta);

/// Weighted human disagreement rate: weighted fraction of pairs where the
/// predicted relation contradicts the annotation.
double whdr(const std::vector<AnnotationPair>& annotations, const LinearImage& albedo,
            double delta);
double whdr_lum(const std::vector<AnnotationPair>& annotations, const GrayMap& albedo_lum,
                double delta);

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

/// Weighted three-class precision/recall as unweighted macro averages over
/// the classes present in the annotations; F = 2PR/(P+R). A class that is
/// never predicted contributes zero precision.
PrfResult prf(const std::vector<AnnotationPair>& annotations, const LinearImage& albedo,
              double delta);

/// Uniform without-replacement resample down to the smallest class count.
/// Deterministic per seed; output preserves input order. Raises
/// MissingClassError when any of E/D/L is absent.
std::vector<AnnotationPair> balanced_subsample(const std::vector<AnnotationPair>& annotations,
                                               std::uint64_t seed);

struct Histogram2D {
  int bins = 64;
  std::vector<std::uint64_t> counts;  // row-major [lum_bin * bins + intensity_bin]
};

struct CorrelationResult {
  double pearson = 0.0;
  Histogram2D histogram;
};

/// Pearson correlation between image luminance and observed LiDAR intensity
/// over the mask, plus their 64x64 joint histogram over [0,1]^2.
CorrelationResult intensity_correlation(const LinearImage& img, const SparseIntensity& sparse);

/// Convenience: WHDR + PRF + class counts in one report.
EvalReport evaluate(const std::vector<AnnotationPair>& annotations, const LinearImage& albedo,
                    double delta, const std::string& method = "", const std::string& dataset = "");

/// Aligned text table with one row per report: method, WHDR, precision,
/// recall, F-score.
std::string format_table(const std::vector<EvalReport>& rows);

}  // namespace lidint
