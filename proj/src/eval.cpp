#include "lidint/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lidint/rng.hpp"

namespace lidint {

namespace {

std::size_t class_index(Judgement j) { return static_cast<std::size_t>(j); }

void require_annotations(const std::vector<AnnotationPair>& annotations, const char* what) {
  if (annotations.empty()) {
    throw EmptyAnnotationsError(std::string(what) + ": no annotations");
  }
}

}  // namespace

Judgement classify_lum_pair(const GrayMap& albedo_lum, const AnnotationPair& pair, double delta) {
  if (!(delta > 0.0)) throw ValidationError("classify_pair: delta must be > 0");
  validate_pair(pair, albedo_lum.width, albedo_lum.height);
  const double l1 = std::max(albedo_lum.at(pair.p1x, pair.p1y), 1e-6);
  const double l2 = std::max(albedo_lum.at(pair.p2x, pair.p2y), 1e-6);
  if (l2 / l1 > 1.0 + delta) return Judgement::D;
  if (l1 / l2 > 1.0 + delta) return Judgement::L;
  return Judgement::E;
}

Judgement classify_pair(const LinearImage& albedo, const AnnotationPair& pair, double delta) {
  return classify_lum_pair(luminance(albedo), pair, delta);
}

double whdr_lum(const std::vector<AnnotationPair>& annotations, const GrayMap& albedo_lum,
                double delta) {
  require_annotations(annotations, "whdr");
  double total = 0.0;
  double disagree = 0.0;
  for (const AnnotationPair& pair : annotations) {
    total += pair.weight;
    if (classify_lum_pair(albedo_lum, pair, delta) != pair.judgement) disagree += pair.weight;
  }
  if (!(total > 0.0)) throw EmptyAnnotationsError("whdr: total annotation weight is zero");
  return disagree / total;
}

double whdr(const std::vector<AnnotationPair>& annotations, const LinearImage& albedo,
            double delta) {
  return whdr_lum(annotations, luminance(albedo), delta);
}

PrfResult prf(const std::vector<AnnotationPair>& annotations, const LinearImage& albedo,
              double delta) {
  require_annotations(annotations, "prf");
  const GrayMap lum = luminance(albedo);
  double true_w[3] = {0.0, 0.0, 0.0};
  double pred_w[3] = {0.0, 0.0, 0.0};
  double correct_w[3] = {0.0, 0.0, 0.0};
  for (const AnnotationPair& pair : annotations) {
    const Judgement predicted = classify_lum_pair(lum, pair, delta);
    true_w[class_index(pair.judgement)] += pair.weight;
    pred_w[class_index(predicted)] += pair.weight;
    if (predicted == pair.judgement) correct_w[class_index(predicted)] += pair.weight;
  }
  // Macro average over the classes present in the annotations; a class the
  // predictor never emits contributes zero precision.
  double p_sum = 0.0, r_sum = 0.0;
  int classes = 0;
  for (int c = 0; c < 3; ++c) {
    if (true_w[c] <= 0.0) continue;
    ++classes;
    p_sum += pred_w[c] > 0.0 ? correct_w[c] / pred_w[c] : 0.0;
    r_sum += correct_w[c] / true_w[c];
  }
  if (classes == 0) throw EmptyAnnotationsError("prf: total annotation weight is zero");
  PrfResult out;
  out.precision = p_sum / classes;
  out.recall = r_sum / classes;
  out.f_score = (out.precision + out.recall) > 0.0
                    ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                    : 0.0;
  return out;
}

std::vector<AnnotationPair> balanced_subsample(const std::vector<AnnotationPair>& annotations,
                                               std::uint64_t seed) {
  require_annotations(annotations, "balanced_subsample");
  std::vector<std::size_t> by_class[3];
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    by_class[class_index(annotations[i].judgement)].push_back(i);
  }
  for (int c = 0; c < 3; ++c) {
    if (by_class[c].empty()) {
      throw MissingClassError(std::string("balanced_subsample: class ") +
                              judgement_letter(static_cast<Judgement>(c)) + " absent");
    }
  }
  const std::size_t m =
      std::min({by_class[0].size(), by_class[1].size(), by_class[2].size()});
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (int c = 0; c < 3; ++c) {
    std::vector<std::size_t>& pool = by_class[c];
    // Partial Fisher-Yates: the first m entries are a uniform sample.
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + m);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<AnnotationPair> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(annotations[i]);
  return out;
}

CorrelationResult intensity_correlation(const LinearImage& img, const SparseIntensity& sparse) {
  require_same_shape(img.width, img.height, sparse.values.width, sparse.values.height,
                     "intensity_correlation");
  const GrayMap lum = luminance(img);
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < sparse.mask.on.size(); ++p) {
    if (!sparse.mask.on[p]) continue;
    sx += lum.data[p];
    sy += sparse.values.data[p];
    ++n;
  }
  if (n < 2) throw EmptyMaskError("intensity_correlation: needs at least 2 observed pixels");
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  CorrelationResult out;
  out.histogram.counts.assign(static_cast<std::size_t>(out.histogram.bins) * out.histogram.bins,
                              0);
  const int bins = out.histogram.bins;
  for (std::size_t p = 0; p < sparse.mask.on.size(); ++p) {
    if (!sparse.mask.on[p]) continue;
    const double x = lum.data[p];
    const double y = sparse.values.data[p];
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
    const int bx = std::min(bins - 1, static_cast<int>(std::clamp(x, 0.0, 1.0) * bins));
    const int by = std::min(bins - 1, static_cast<int>(std::clamp(y, 0.0, 1.0) * bins));
    ++out.histogram.counts[static_cast<std::size_t>(bx) * bins + by];
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw DegenerateVarianceError("intensity_correlation: a marginal is constant");
  }
  out.pearson = sxy / std::sqrt(sxx * syy);
  return out;
}

EvalReport evaluate(const std::vector<AnnotationPair>& annotations, const LinearImage& albedo,
                    double delta, const std::string& method, const std::string& dataset) {
  EvalReport report;
  report.delta = delta;
  report.method = method;
  report.dataset = dataset;
  report.whdr = whdr(annotations, albedo, delta);
  const PrfResult p = prf(annotations, albedo, delta);
  report.precision = p.precision;
  report.recall = p.recall;
  report.f_score = p.f_score;
  for (const AnnotationPair& pair : annotations) ++report.counts[class_index(pair.judgement)];
  return report;
}

std::string format_table(const std::vector<EvalReport>& rows) {
  std::size_t name_width = 6;
  for (const EvalReport& r : rows) name_width = std::max(name_width, r.method.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s  %6s  %9s  %6s  %7s\n",
                static_cast<int>(name_width), "method", "WHDR", "precision", "recall", "F-score");
  out += line;
  for (const EvalReport& r : rows) {
    std::snprintf(line, sizeof(line), "%-*s  %6.3f  %9.3f  %6.3f  %7.3f\n",
                  static_cast<int>(name_width), r.method.c_str(), r.whdr, r.precision, r.recall,
                  r.f_score);
    out += line;
  }
  return out;
}

}  // namespace lidint
