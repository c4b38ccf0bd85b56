#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "detune/geometry.hpp"
#include "detune/rng.hpp"
#include "support/oracles.hpp"

using namespace detune;

TEST(Iou, IdenticalDisjointAndHandValue) {
  const BBox a{0, 0, 2, 2};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 0, 3, 2}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(oracle::raster_iou({0, 0, 2, 2}, {1, 0, 3, 2}), 1.0 / 3.0);
}

TEST(Iou, DegenerateUnionIsZero) {
  const BBox p{1, 1, 1, 1};
  EXPECT_EQ(iou(p, p), 0.0);
  EXPECT_EQ(iou({0, 0, 0, 5}, {0, 0, 0, 5}), 0.0);
}

TEST(Iou, InvalidBoxThrows) {
  EXPECT_THROW(iou({2, 0, 1, 1}, {0, 0, 1, 1}), InvalidArgument);
  EXPECT_THROW(iou({0, 0, 1, 1}, {0, 0, 1, NAN}), InvalidArgument);
}

TEST(Iou, MatchesRasterOracleOnIntegerBoxes) {
  Stream rng(1, "raster");
  for (int trial = 0; trial < 2000; ++trial) {
    auto box = [&] {
      const int x0 = static_cast<int>(rng.below(40));
      const int y0 = static_cast<int>(rng.below(40));
      return BBox{double(x0), double(y0), double(x0 + 1 + rng.below(20)), double(y0 + 1 + rng.below(20))};
    };
    const BBox a = box();
    const BBox b = box();
    ASSERT_NEAR(iou(a, b), oracle::raster_iou(a, b), 1e-12);
  }
}

TEST(Iou, SymmetryRangeSelfAndTranslation) {
  Stream rng(2, "iou-props");
  for (int trial = 0; trial < 5000; ++trial) {
    const BBox a = oracle::random_box(rng);
    const BBox b = oracle::random_box(rng);
    const double v = iou(a, b);
    ASSERT_EQ(v, iou(b, a));
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    if (a.area() > 0.0) {
      ASSERT_EQ(iou(a, a), 1.0);
    }
    const double dx = std::ldexp(static_cast<double>(rng.below(8)), -2);
    const double dy = std::ldexp(static_cast<double>(rng.below(8)), -3);
    ASSERT_NEAR(iou(a.translated(dx, dy), b.translated(dx, dy)), v, 1e-12);
  }
}

TEST(ConfidenceScore, Values) {
  EXPECT_EQ(confidence_score(1.0, 1.0), 1.0);
  EXPECT_EQ(confidence_score(0.37, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(confidence_score(0.8, 0.5), 0.4);
  EXPECT_THROW(confidence_score(1.2, 0.5), InvalidArgument);
  EXPECT_THROW(confidence_score(0.5, -0.1), InvalidArgument);
}

TEST(Softmax, Examples) {
  const std::vector<double> zeros{0, 0, 0};
  for (double p : class_probabilities(zeros)) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
  const std::vector<double> one{42.0};
  EXPECT_EQ(class_probabilities(one), (std::vector<double>{1.0}));
  const std::vector<double> l{std::log(1.0), std::log(3.0)};
  const auto p = class_probabilities(l);
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, Errors) {
  EXPECT_THROW(class_probabilities(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(class_probabilities(std::vector<double>{0.0, INFINITY}), InvalidArgument);
}

TEST(Softmax, SumShiftAndExtremes) {
  Stream rng(3, "softmax");
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    const double spread = trial % 4 == 0 ? 1e4 : 20.0;
    std::vector<double> z(n);
    for (auto& v : z) v = rng.uniform(-spread, spread);
    const auto p = class_probabilities(z);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    ASSERT_NEAR(sum, 1.0, 1e-12);
    for (double v : p) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    const double c = rng.uniform(-100.0, 100.0);
    auto shifted = z;
    for (auto& v : shifted) v += c;
    const auto q = class_probabilities(shifted);
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(p[i], q[i], 1e-9);
  }
}

TEST(Nms, IdenticalBoxesSameClassKeepsHigher) {
  const std::vector<Detection> d{{{0, 0, 1, 1}, 0, 0.8}, {{0, 0, 1, 1}, 0, 0.9}};
  const auto kept = nms(d, 0.5, 0.0);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].confidence, 0.9);
}

TEST(Nms, DifferentClassesBothSurvive) {
  const std::vector<Detection> d{{{0, 0, 1, 1}, 0, 0.9}, {{0, 0, 1, 1}, 1, 0.8}};
  EXPECT_EQ(nms(d, 0.5, 0.0).size(), 2u);
}

TEST(Nms, ThresholdsAreInclusiveAndStrict) {
  // IoU exactly 1/3 with threshold 1/3 survives (strict >).
  const std::vector<Detection> d{{{0, 0, 2, 2}, 0, 0.9}, {{1, 0, 3, 2}, 0, 0.8}};
  EXPECT_EQ(nms(d, 1.0 / 3.0, 0.0).size(), 2u);
  EXPECT_EQ(nms(d, 0.3, 0.0).size(), 1u);
  // Confidence equal to the threshold is retained.
  EXPECT_EQ(nms(d, 0.5, 0.8).size(), 2u);
  EXPECT_EQ(nms(d, 0.5, 0.81).size(), 1u);
}

TEST(Nms, TiesBreakByInputIndex) {
  const std::vector<Detection> d{{{0, 0, 1, 1}, 0, 0.5}, {{0, 0, 1, 1.01}, 0, 0.5}};
  const auto kept = nms(d, 0.5, 0.0);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].box, d[0].box);
}

TEST(Nms, InvalidThresholds) {
  const std::vector<Detection> d{{{0, 0, 1, 1}, 0, 0.5}};
  EXPECT_THROW(nms(d, 1.5, 0.0), InvalidArgument);
  EXPECT_THROW(nms(d, 0.5, -0.1), InvalidArgument);
}

TEST(Nms, MatchesBruteForceOracleAndProperties) {
  Stream rng(4, "nms");
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.below(13);
    std::vector<Detection> d(n);
    for (auto& det : d) {
      det.box = oracle::random_box(rng);
      det.class_id = static_cast<int>(rng.below(3));
      // Coarse confidences make ties common.
      det.confidence = static_cast<double>(rng.below(11)) / 10.0;
    }
    const double thr = rng.uniform(0.1, 0.9);
    const double conf = rng.uniform(0.0, 0.5);
    const auto kept = nms(d, thr, conf);
    ASSERT_EQ(kept, oracle::brute_nms(d, thr, conf)) << "trial " << trial;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      ASSERT_NE(std::find(d.begin(), d.end(), kept[i]), d.end());
      if (i > 0) {
        ASSERT_GE(kept[i - 1].confidence, kept[i].confidence);
      }
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (kept[i].class_id == kept[j].class_id) {
          ASSERT_LE(iou(kept[i].box, kept[j].box), thr);
        }
      }
    }
    ASSERT_EQ(nms(kept, thr, conf), kept);
  }
}
