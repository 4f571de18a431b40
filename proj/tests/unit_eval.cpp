#include <doctest.h>

#include <cmath>

#include "lidint/eval.hpp"
#include "lidint/rng.hpp"
#include "test_util.hpp"

using namespace lidint;

namespace {

// Balanced unit-weight annotations over a luminance map with three bands.
std::vector<AnnotationPair> balanced_unit_annotations(int per_class) {
  std::vector<AnnotationPair> ann;
  for (int i = 0; i < per_class; ++i) {
    ann.push_back({0, 0, 1, 0, Judgement::E, 1.0});
    ann.push_back({0, 1, 1, 1, Judgement::D, 1.0});
    ann.push_back({0, 2, 1, 2, Judgement::L, 1.0});
  }
  return ann;
}

}  // namespace

TEST_CASE("classify_pair ratio rule") {
  GrayMap lum = GrayMap::zeros(4, 4);
  lum.at(0, 0) = 0.5;
  lum.at(1, 0) = 0.5;
  lum.at(0, 1) = 0.5;
  lum.at(1, 1) = 0.6;
  lum.at(0, 2) = 0.5;
  lum.at(1, 2) = 0.55;  // ratio is exactly 1 + delta; strict rule keeps E

  CHECK(classify_lum_pair(lum, {0, 0, 1, 0, Judgement::E, 1.0}, 0.1) == Judgement::E);
  CHECK(classify_lum_pair(lum, {0, 1, 1, 1, Judgement::E, 1.0}, 0.1) == Judgement::D);
  CHECK(classify_lum_pair(lum, {1, 1, 0, 1, Judgement::E, 1.0}, 0.1) == Judgement::L);
  CHECK(classify_lum_pair(lum, {0, 2, 1, 2, Judgement::E, 1.0}, 0.1) == Judgement::E);

  CHECK_THROWS_AS(classify_lum_pair(lum, {0, 0, 9, 9, Judgement::E, 1.0}, 0.1),
                  ValidationError);

  const LinearImage img = LinearImage::constant(4, 4, 0.4, 0.4, 0.4);
  CHECK(classify_pair(img, {0, 0, 3, 3, Judgement::E, 1.0}, 0.1) == Judgement::E);
}

TEST_CASE("whdr on exact, contradicting and weighted annotations") {
  GrayMap lum = GrayMap::zeros(4, 4);
  lum.at(0, 0) = 0.2;
  lum.at(1, 0) = 0.2;   // E
  lum.at(0, 1) = 0.2;
  lum.at(1, 1) = 0.5;   // D
  lum.at(0, 2) = 0.5;
  lum.at(1, 2) = 0.2;   // L

  std::vector<AnnotationPair> ann = {{0, 0, 1, 0, Judgement::E, 1.0},
                                     {0, 1, 1, 1, Judgement::D, 1.0},
                                     {0, 2, 1, 2, Judgement::L, 1.0}};
  CHECK(whdr_lum(ann, lum, 0.1) == 0.0);

  ann[0].judgement = Judgement::D;
  ann[1].judgement = Judgement::L;
  ann[2].judgement = Judgement::E;
  CHECK(whdr_lum(ann, lum, 0.1) == 1.0);

  // Weights (1, 2, 1); only the weight-2 pair disagrees -> 2/4.
  ann = {{0, 0, 1, 0, Judgement::E, 1.0},
         {0, 1, 1, 1, Judgement::L, 2.0},
         {0, 2, 1, 2, Judgement::L, 1.0}};
  CHECK(whdr_lum(ann, lum, 0.1) == 0.5);

  CHECK_THROWS_AS(whdr_lum({}, lum, 0.1), EmptyAnnotationsError);
}

TEST_CASE("whdr is invariant to uniform weight rescaling") {
  Rng rng(71);
  GrayMap lum = testutil::random_gray(rng, 8, 8, 0.1, 1.0);
  std::vector<AnnotationPair> ann;
  for (int i = 0; i < 30; ++i) {
    AnnotationPair p{static_cast<int>(rng.uniform_index(8)), static_cast<int>(rng.uniform_index(8)),
                     static_cast<int>(rng.uniform_index(8)), static_cast<int>(rng.uniform_index(8)),
                     static_cast<Judgement>(rng.uniform_index(3)), rng.uniform(0.1, 3.0)};
    if (p.p1x == p.p2x && p.p1y == p.p2y) continue;
    ann.push_back(p);
  }
  const double base = whdr_lum(ann, lum, 0.1);
  std::vector<AnnotationPair> scaled = ann;
  for (auto& p : scaled) p.weight *= 7.25;
  CHECK(whdr_lum(scaled, lum, 0.1) == doctest::Approx(base).epsilon(1e-12));
  CHECK(base >= 0.0);
  CHECK(base <= 1.0);
}

TEST_CASE("whdr and classification are scale invariant in the albedo") {
  Rng rng(72);
  const GrayMap lum = testutil::random_gray(rng, 8, 8, 0.05, 1.0);
  std::vector<AnnotationPair> ann;
  for (int i = 0; i < 40; ++i) {
    AnnotationPair p{static_cast<int>(rng.uniform_index(8)), static_cast<int>(rng.uniform_index(8)),
                     static_cast<int>(rng.uniform_index(8)), static_cast<int>(rng.uniform_index(8)),
                     static_cast<Judgement>(rng.uniform_index(3)), 1.0};
    if (p.p1x == p.p2x && p.p1y == p.p2y) continue;
    ann.push_back(p);
  }
  const double base = whdr_lum(ann, lum, 0.1);
  for (double c : {0.1, 1.0, 10.0}) {
    GrayMap scaled = lum;
    for (double& v : scaled.data) v *= c;
    CHECK(whdr_lum(ann, scaled, 0.1) == base);
  }
}

TEST_CASE("baseline-R identity: all-ones albedo on balanced unit weights scores 2/3") {
  GrayMap lum = GrayMap::zeros(4, 4);
  lum.at(0, 0) = 0.3;
  lum.at(1, 0) = 0.3;
  lum.at(0, 1) = 0.2;
  lum.at(1, 1) = 0.9;
  lum.at(0, 2) = 0.9;
  lum.at(1, 2) = 0.2;
  const auto ann = balanced_unit_annotations(7);
  const LinearImage ones = LinearImage::constant(4, 4, 1.0, 1.0, 1.0);
  CHECK(whdr(ann, ones, 0.1) == 2.0 / 3.0);
}

TEST_CASE("prf: perfect predictions and the always-E analysis") {
  GrayMap lum = GrayMap::zeros(4, 4);
  lum.at(0, 0) = 0.2;
  lum.at(1, 0) = 0.2;
  lum.at(0, 1) = 0.2;
  lum.at(1, 1) = 0.5;
  lum.at(0, 2) = 0.5;
  lum.at(1, 2) = 0.2;
  std::vector<AnnotationPair> ann = {{0, 0, 1, 0, Judgement::E, 1.0},
                                     {0, 1, 1, 1, Judgement::D, 1.0},
                                     {0, 2, 1, 2, Judgement::L, 1.0}};
  LinearImage perfect(4, 4, std::vector<double>(4 * 4 * 3, 0.0));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) perfect.at(x, y, c) = std::max(lum.at(x, y), 0.01);
    }
  }
  PrfResult r = prf(ann, perfect, 0.1);
  CHECK(r.precision == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.f_score == doctest::Approx(1.0).epsilon(1e-12));

  // An all-ones predictor says E everywhere on a balanced set.
  const auto balanced = balanced_unit_annotations(5);
  const LinearImage ones = LinearImage::constant(4, 4, 1.0, 1.0, 1.0);
  r = prf(balanced, ones, 0.1);
  CHECK(r.precision == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.f_score == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  // Single correct pair.
  r = prf({{0, 1, 1, 1, Judgement::D, 2.0}}, perfect, 0.1);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f_score == 1.0);
}

TEST_CASE("balanced_subsample equalizes class counts deterministically") {
  Rng rng(73);
  std::vector<AnnotationPair> ann;
  auto add = [&](Judgement j, int count) {
    for (int i = 0; i < count; ++i) {
      ann.push_back({static_cast<int>(rng.uniform_index(100)),
                     static_cast<int>(rng.uniform_index(100)),
                     static_cast<int>(100 + rng.uniform_index(100)),
                     static_cast<int>(rng.uniform_index(100)), j, 1.0});
    }
  };
  add(Judgement::E, 9411);
  add(Judgement::D, 2554);
  add(Judgement::L, 661);

  const auto sub = balanced_subsample(ann, 5);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& p : sub) ++counts[static_cast<int>(p.judgement)];
  CHECK(counts[0] == 661);
  CHECK(counts[1] == 661);
  CHECK(counts[2] == 661);

  const auto again = balanced_subsample(ann, 5);
  REQUIRE(again.size() == sub.size());
  for (std::size_t i = 0; i < sub.size(); ++i) {
    CHECK(sub[i].p1x == again[i].p1x);
    CHECK(sub[i].judgement == again[i].judgement);
  }

  // Already balanced input comes back whole, order preserved.
  std::vector<AnnotationPair> balanced;
  for (int i = 0; i < 4; ++i) {
    balanced.push_back({i, 0, i + 1, 1, Judgement::E, 1.0});
    balanced.push_back({i, 2, i + 1, 3, Judgement::D, 1.0});
    balanced.push_back({i, 4, i + 1, 5, Judgement::L, 1.0});
  }
  const auto same = balanced_subsample(balanced, 99);
  REQUIRE(same.size() == balanced.size());
  for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i].p1x == balanced[i].p1x);

  std::vector<AnnotationPair> missing = {{0, 0, 1, 0, Judgement::E, 1.0},
                                         {0, 1, 1, 1, Judgement::L, 1.0}};
  CHECK_THROWS_AS(balanced_subsample(missing, 1), MissingClassError);
}

TEST_CASE("intensity correlation: exact, inverted, noisy-oracle, error paths") {
  Rng rng(74);
  const LinearImage img = testutil::random_image(rng, 16, 16, 0.2, 0.8);
  const GrayMap lum = luminance(img);

  SparseIntensity exact(lum, MaskMap::full(16, 16));
  CHECK(intensity_correlation(img, exact).pearson == doctest::Approx(1.0).epsilon(1e-12));

  GrayMap inverted = lum;
  for (double& v : inverted.data) v = 1.0 - v;
  SparseIntensity anti(inverted, MaskMap::full(16, 16));
  CHECK(intensity_correlation(img, anti).pearson == doctest::Approx(-1.0).epsilon(1e-12));

  // Noise scaled for a correlation near the mid-0.4s.
  double mean = 0.0;
  for (double v : lum.data) mean += v;
  mean /= lum.data.size();
  double var = 0.0;
  for (double v : lum.data) var += (v - mean) * (v - mean);
  var /= lum.data.size();
  const double sigma = std::sqrt(var * (1.0 / (0.45 * 0.45) - 1.0));
  GrayMap noisy = lum;
  for (double& v : noisy.data) v = std::clamp(v + sigma * rng.gaussian(), 0.0, 1.0);
  SparseIntensity sp(noisy, MaskMap::full(16, 16));
  const CorrelationResult res = intensity_correlation(img, sp);
  std::vector<double> xs, ys;
  for (std::size_t p = 0; p < lum.data.size(); ++p) {
    xs.push_back(lum.data[p]);
    ys.push_back(noisy.data[p]);
  }
  CHECK(res.pearson == doctest::Approx(testutil::oracle_pearson(xs, ys)).epsilon(1e-6));
  CHECK(res.pearson > 0.25);
  CHECK(res.pearson < 0.65);
  std::uint64_t total = 0;
  for (std::uint64_t c : res.histogram.counts) total += c;
  CHECK(total == lum.data.size());

  SparseIntensity tiny(GrayMap::zeros(16, 16), MaskMap::empty(16, 16));
  CHECK_THROWS_AS(intensity_correlation(img, tiny), EmptyMaskError);
  SparseIntensity flat(GrayMap::constant(16, 16, 0.5), MaskMap::full(16, 16));
  CHECK_THROWS_AS(intensity_correlation(img, flat), DegenerateVarianceError);
}

TEST_CASE("evaluate assembles a report and format_table aligns it") {
  GrayMap lum = GrayMap::zeros(4, 4);
  lum.at(0, 0) = 0.2;
  lum.at(1, 0) = 0.2;
  lum.at(0, 1) = 0.2;
  lum.at(1, 1) = 0.5;
  std::vector<AnnotationPair> ann = {{0, 0, 1, 0, Judgement::E, 1.0},
                                     {0, 1, 1, 1, Judgement::D, 1.0}};
  LinearImage albedo(4, 4, std::vector<double>(48, 0.0));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) albedo.at(x, y, c) = std::max(lum.at(x, y), 0.01);
    }
  }
  const EvalReport report = evaluate(ann, albedo, 0.1, "unit", "toy");
  CHECK(report.whdr == 0.0);
  CHECK(report.counts[0] == 1);
  CHECK(report.counts[1] == 1);
  CHECK(report.counts[2] == 0);
  const std::string table = format_table({report});
  CHECK(table.find("method") != std::string::npos);
  CHECK(table.find("unit") != std::string::npos);
}
