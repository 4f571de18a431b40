#include <doctest.h>

#include <cmath>

#include "lidint/image.hpp"
#include "lidint/rng.hpp"
#include "test_util.hpp"

using namespace lidint;

TEST_CASE("inverse gamma fixed points and midpoint") {
  EncodedImage img(2, 2, {0.0, 1.0, 0.5, 0.25, 0.75, 0.1, 0.9, 0.33, 0.0, 1.0, 0.5, 0.2});
  const LinearImage lin = inverse_gamma(img);
  CHECK(lin.at(0, 0, 0) == 0.0);
  CHECK(lin.at(0, 0, 1) == 1.0);
  CHECK(lin.at(0, 0, 2) == doctest::Approx(0.217638).epsilon(1e-5));
}

TEST_CASE("inverse gamma rejects out-of-range input naming the pixel") {
  EncodedImage img(2, 2, std::vector<double>(12, 0.5));
  img.at(1, 0, 2) = 1.5;
  CHECK_THROWS_WITH_AS(inverse_gamma(img), doctest::Contains("(1, 0)"), ValidationError);
  img.at(1, 0, 2) = std::nan("");
  CHECK_THROWS_AS(inverse_gamma(img), ValidationError);
}

TEST_CASE("apply gamma inverts inverse gamma") {
  const GammaConfig cfg(2.2);
  LinearImage lin(2, 2, {0.0, 1.0, 0.217638, 0.3, 0.6, 0.9, 0.05, 0.5, 0.99, 0.2, 0.4, 0.8});
  const EncodedImage enc = apply_gamma(lin, cfg);
  CHECK(enc.at(0, 0, 0) == 0.0);
  CHECK(enc.at(0, 0, 1) == 1.0);
  CHECK(enc.at(0, 0, 2) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("gamma round trip holds to 1e-9 on 10^4 random values") {
  Rng rng(11);
  const GammaConfig cfg(2.2);
  const int side = 60;  // 60*60 = 3600 pixels * 3 channels > 10^4 values
  const LinearImage img = testutil::random_image(rng, side, side, 0.0, 1.0);
  const LinearImage round = inverse_gamma(apply_gamma(img, cfg), cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    worst = std::max(worst, std::abs(img.data[i] - round.data[i]));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("luminance weights and range") {
  LinearImage img(2, 2, {1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0});
  const GrayMap lum = luminance(img);
  CHECK(lum.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lum.at(1, 0) == 0.0);
  CHECK(lum.at(0, 1) == doctest::Approx(0.2126).epsilon(1e-12));
  CHECK(lum.at(1, 1) == doctest::Approx(0.7152).epsilon(1e-12));
}

TEST_CASE("luminance is linear in the pixel values") {
  Rng rng(12);
  const LinearImage a = testutil::random_image(rng, 4, 4, 0.0, 0.5);
  const LinearImage b = testutil::random_image(rng, 4, 4, 0.0, 0.5);
  const double ca = 0.6, cb = 0.4;
  std::vector<double> mix(a.data.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = ca * a.data[i] + cb * b.data[i];
  const GrayMap lm = luminance(LinearImage(4, 4, mix));
  const GrayMap la = luminance(a);
  const GrayMap lb = luminance(b);
  for (std::size_t p = 0; p < lm.data.size(); ++p) {
    CHECK(lm.data[p] == doctest::Approx(ca * la.data[p] + cb * lb.data[p]).epsilon(1e-12));
  }
}

TEST_CASE("chromaticity basics") {
  LinearImage img(2, 2, {0.2, 0.2, 0.2, 1, 0, 0, 0, 0, 0, 0.3, 0.5, 0.1});
  const ChromaMap c = chromaticity(img);
  CHECK(c.r(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(c.g(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(c.r(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.g(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.r(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));  // degenerate guard
}

TEST_CASE("chromaticity is scale invariant") {
  Rng rng(13);
  const LinearImage img = testutil::random_image(rng, 5, 5, 0.1, 0.9);
  for (double k : {0.2, 0.5, 1.0}) {
    std::vector<double> scaled(img.data.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = k * img.data[i];
    const ChromaMap a = chromaticity(img);
    const ChromaMap b = chromaticity(LinearImage(5, 5, scaled));
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("container invariants") {
  CHECK_THROWS_AS(LinearImage(1, 4, std::vector<double>(12, 0.0)), ValidationError);
  CHECK_THROWS_AS(GrayMap(2, 2, {0.0, 1.0, std::nan(""), 0.5}), ValidationError);
  CHECK_THROWS_AS(MaskMap(2, 2, {0, 1, 2, 0}), ValidationError);
  CHECK_THROWS_AS(GammaConfig(0.0), ValidationError);
  // Values are clamped into [0, 1+eps] on construction.
  LinearImage img(2, 2, {-0.5, 2.0, 0.5, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(0, 0, 1) == 1.0 + kUnitEps);
}
