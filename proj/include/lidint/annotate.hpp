#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lidint/image.hpp"

namespace lidint {

/// Pairwise judgement classes: equal albedo, first point darker, first point
/// lighter (i.e. second point darker).
enum class Judgement { E, D, L };

char judgement_letter(Judgement j);
Judgement judgement_from_letter(char c);

/// Sub-pixel sample position.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Near-maximal Poisson-disk sample over the image rectangle via Bridson
/// dart throwing (30 attempts per active point). The minimum pairwise
/// distance is r_frac * min(width, height). Deterministic per seed.
std::vector<Point2> poisson_disk(int width, int height, double r_frac, std::uint64_t seed);

/// Saturation and edge-exclusion thresholds for sampled points.
struct FilterThresholds {
  double lum_lo = 0.02;
  double lum_hi = 0.98;
  double edge_threshold = 0.1;  // on the raw Sobel magnitude of luminance
  double edge_radius = 3.0;     // pixels
};

/// Raw (unnormalized) Sobel gradient magnitude with replicated borders.
GrayMap sobel_magnitude(const GrayMap& gray);

/// Drops points that are over/under-saturated or near a luminance edge.
/// Order of the survivors is preserved.
std::vector<Point2> filter_points(const std::vector<Point2>& points, const LinearImage& img,
                                  const FilterThresholds& thresholds = FilterThresholds());

/// Edge set of the Delaunay triangulation (Bowyer-Watson), each undirected
/// edge reported once as an index pair (a < b). Collinear or two-point
/// inputs fall back to the chain of nearest-neighbor links; fewer than two
/// points raise DegenerateGeometryError.
std::vector<std::pair<int, int>> delaunay_pairs(const std::vector<Point2>& points);

/// One annotator's three answers for a pair.
struct AnnotatorAnswer {
  int same_albedo = 1;       // +1 yes / -1 no
  int first_darker = 1;      // +1 yes / -1 no
  double confidence = 1.0;   // 1.0 definitely, 0.8 probably, 0.3 guessing
};

struct AggregatedJudgement {
  Judgement judgement = Judgement::E;
  double weight = 0.0;  // zero-weight results are dropped by callers
};

/// Confidence-weighted vote over exactly five answers.
AggregatedJudgement aggregate(const std::vector<AnnotatorAnswer>& answers);

/// A judged pixel pair. D means p1 is darker, L means p2 is darker.
struct AnnotationPair {
  int p1x = 0;
  int p1y = 0;
  int p2x = 0;
  int p2y = 0;
  Judgement judgement = Judgement::E;
  double weight = 1.0;
};

/// Throws ValidationError when a pair is degenerate or out of bounds.
void validate_pair(const AnnotationPair& pair, int width, int height);

/// One pair's endpoints plus its five collected answers.
struct AnsweredPair {
  int p1x = 0;
  int p1y = 0;
  int p2x = 0;
  int p2y = 0;
  std::vector<AnnotatorAnswer> answers;
};

struct AggregatedAnnotations {
  std::vector<AnnotationPair> pairs;
  std::size_t discarded = 0;  // zero-weight votes dropped
};

/// Aggregates a batch of answered pairs, dropping zero-weight outcomes and
/// reporting how many were dropped.
AggregatedAnnotations aggregate_batch(const std::vector<AnsweredPair>& answered);

/// Oracle annotator for synthetic scenes: applies the ratio-threshold
/// classifier to ground-truth albedo luminance at the paired points, with
/// unit weight.
std::vector<AnnotationPair> simulate_judgements(const LinearImage& gt_albedo,
                                                const std::vector<std::pair<int, int>>& pairs,
                                                const std::vector<Point2>& points, double delta);

/// Optional JSON field-name remapping for externally produced pair files.
struct AnnotationFieldMapping {
  std::string image_id = "image_id";
  std::string p1 = "p1";
  std::string p2 = "p2";
  std::string judgement = "J";
  std::string weight = "w";
};

struct AnnotationRecord {
  std::string image_id;
  AnnotationPair pair;
};

/// JSON-lines writer: one {image_id, p1, p2, J, w} object per line.
void save_annotations(const std::string& path, const std::string& image_id,
                      const std::vector<AnnotationPair>& pairs);

/// JSON-lines reader; malformed or invariant-violating lines raise
/// ParseError carrying the 1-based line number.
std::vector<AnnotationRecord> load_annotations(
    const std::string& path, const AnnotationFieldMapping& mapping = AnnotationFieldMapping());

}  // namespace lidint
