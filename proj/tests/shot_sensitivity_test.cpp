#include "shotmetric/shot_sensitivity.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "shotmetric/error.hpp"
#include "shotmetric/grid_io.hpp"
#include "test_util.hpp"

namespace shotmetric {
namespace {

using testing::Gen;
using testing::data_path;

const std::vector<int> kTestShots{1, 2, 4, 8, 16, 32};
const std::vector<int> kTrainShots{4, 8, 16, 32};

AccuracyGrid grid_file(const std::string& name) {
  return read_grid_csv(data_path("grids/" + name + ".csv"));
}

AccuracyGrid random_grid(Gen& gen, int t, int j) {
  std::vector<int> ts(static_cast<std::size_t>(t)), js(static_cast<std::size_t>(j));
  std::iota(ts.begin(), ts.end(), 1);
  std::iota(js.begin(), js.end(), 1);
  Matrix v(t, j);
  for (int r = 0; r < t; ++r)
    for (int c = 0; c < j; ++c) v(r, c) = gen.uniform(20.0, 80.0);
  return AccuracyGrid(v, ts, js);
}

// Plain two-loop reference for the score.
double score_oracle(const Matrix& a) {
  const auto t = a.rows(), j = a.cols();
  std::vector<double> row(static_cast<std::size_t>(t), 0.0), bias(static_cast<std::size_t>(j), 0.0);
  for (Eigen::Index r = 0; r < t; ++r) {
    for (Eigen::Index c = 0; c < j; ++c) row[r] += a(r, c);
    row[r] /= double(j);
  }
  for (Eigen::Index c = 0; c < j; ++c) {
    for (Eigen::Index r = 0; r < t; ++r) bias[c] += a(r, c) - row[r];
    bias[c] /= double(t);
  }
  double lo = 1e300, hi = -1e300;
  for (Eigen::Index r = 0; r < t; ++r)
    for (Eigen::Index c = 0; c < j; ++c) {
      const double h = a(r, c) - row[r] - bias[c];
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
  return hi - lo;
}

TEST(AccuracyGridTest, Validation) {
  const Matrix ok = Matrix::Constant(2, 2, 50.0);
  EXPECT_NO_THROW(AccuracyGrid(ok, {1, 2}, {4, 8}));
  EXPECT_THROW(AccuracyGrid(Matrix::Constant(1, 2, 50.0), {1}, {4, 8}), Error);
  EXPECT_THROW(AccuracyGrid(ok, {1, 2, 3}, {4, 8}), Error);
  EXPECT_THROW(AccuracyGrid(ok, {2, 1}, {4, 8}), Error);
  EXPECT_THROW(AccuracyGrid(ok, {1, 1}, {4, 8}), Error);
  EXPECT_THROW(AccuracyGrid(ok, {0, 1}, {4, 8}), Error);
  Matrix bad = ok;
  bad(0, 1) = 100.5;
  EXPECT_THROW(AccuracyGrid(bad, {1, 2}, {4, 8}), Error);
  bad(0, 1) = NAN;
  EXPECT_THROW(AccuracyGrid(bad, {1, 2}, {4, 8}), Error);
}

TEST(DecomposeGoldenTest, MetaInatConv4Proto) {
  const SensitivityReport r = decompose(grid_file("meta_inat_conv_4__proto"));
  EXPECT_NEAR(r.score, 14.86, 0.03);
  const double bias[] = {0.47, 1.99, 0.16, -2.61};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(r.model_bias(j), bias[j], 0.03) << j;
  const double rows[] = {49.04, 63.95, 74.17, 79.86, 82.76, 84.30};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(r.row_means(i), rows[i], 0.03) << i;
}

TEST(DecomposeGoldenTest, PublishedScores) {
  EXPECT_NEAR(sensitivity_score(grid_file("meta_inat_conv_4__cosine_proto")), 2.13, 0.03);
  EXPECT_NEAR(sensitivity_score(grid_file("cub_conv_4__frn")), 6.71, 0.03);
  EXPECT_NEAR(sensitivity_score(grid_file("cub_conv_4__cosine_frn")), 1.29, 0.03);
  EXPECT_NEAR(sensitivity_score(grid_file("min_resnet_12__cosine_feat")), 0.19, 0.03);
  EXPECT_NEAR(sensitivity_score(grid_file("meta_inat_conv_4__feat")), 4.16, 0.03);
  EXPECT_NEAR(sensitivity_score(grid_file("tin_resnet_12__cosine_frn")), 0.39, 0.03);
}

TEST(DecomposeTest, MatchesLoopOracle) {
  Gen gen(21);
  for (int k = 0; k < 100; ++k) {
    const AccuracyGrid g = random_grid(gen, gen.integer(2, 8), gen.integer(2, 8));
    EXPECT_NEAR(sensitivity_score(g), score_oracle(g.values()), 1e-11);
  }
}

TEST(DecomposeTest, ConstantGridHasZeroScore) {
  const AccuracyGrid g(Matrix::Constant(6, 4, 73.0), kTestShots, kTrainShots);
  const SensitivityReport r = decompose(g);
  EXPECT_EQ(r.score, 0.0);
  EXPECT_EQ(r.model_bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DecomposeTest, XorGrid) {
  Matrix v(2, 2);
  v << 60, 50, 50, 60;
  const SensitivityReport r = decompose(AccuracyGrid(v, {1, 32}, {4, 32}));
  EXPECT_NEAR(r.row_means(0), 55.0, 1e-12);
  EXPECT_NEAR(r.model_bias.cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(r.heatmap(0, 0), 5.0, 1e-12);
  EXPECT_NEAR(r.heatmap(0, 1), -5.0, 1e-12);
  EXPECT_NEAR(r.score, 10.0, 1e-12);
}

TEST(DecomposeTest, ReconstructionIdentityAndCentering) {
  Gen gen(22);
  for (int k = 0; k < 200; ++k) {
    const AccuracyGrid g = random_grid(gen, gen.integer(2, 9), gen.integer(2, 9));
    const SensitivityReport r = decompose(g);
    Matrix rebuilt = r.heatmap;
    rebuilt.colwise() += r.row_means;
    rebuilt.rowwise() += r.model_bias.transpose();
    EXPECT_LE((rebuilt - g.values()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(r.heatmap.rowwise().sum().cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LE(r.heatmap.colwise().sum().cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LE(std::abs(r.model_bias.sum()), 1e-11);
    EXPECT_GE(r.score, 0.0);
  }
}

TEST(DecomposeTest, AdditiveBiasesAreAbsorbed) {
  Gen gen(23);
  for (int k = 0; k < 200; ++k) {
    const int t = gen.integer(2, 8), j = gen.integer(2, 8);
    const AccuracyGrid g = random_grid(gen, t, j);
    Matrix shifted = g.values();
    for (int r = 0; r < t; ++r) shifted.row(r).array() += gen.uniform(-10.0, 10.0);
    for (int c = 0; c < j; ++c) shifted.col(c).array() += gen.uniform(-10.0, 10.0);
    const SensitivityReport a = decompose(g);
    const SensitivityReport b = decompose(AccuracyGrid(shifted, g.test_shots(), g.train_shots()));
    EXPECT_LE((a.heatmap - b.heatmap).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(a.score, b.score, 1e-9);
  }
}

TEST(DecomposeTest, IdempotentOnHeatmapAndPermutationInvariant) {
  Gen gen(24);
  for (int k = 0; k < 100; ++k) {
    const int t = gen.integer(2, 7), j = gen.integer(2, 7);
    const AccuracyGrid g = random_grid(gen, t, j);
    const SensitivityReport r = decompose(g);
    // Re-centre the heatmap into range so it is itself a valid grid.
    Matrix again = r.heatmap.array() + 50.0;
    const SensitivityReport r2 = decompose(AccuracyGrid(again, g.test_shots(), g.train_shots()));
    EXPECT_LE((r2.heatmap - r.heatmap).cwiseAbs().maxCoeff(), 1e-11);

    std::vector<int> order(static_cast<std::size_t>(j));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen.engine());
    Matrix cols(t, j);
    for (int c = 0; c < j; ++c) cols.col(c) = g.values().col(order[c]);
    EXPECT_NEAR(sensitivity_score(AccuracyGrid(cols, g.test_shots(), g.train_shots())), r.score,
                1e-11);
  }
}

TEST(GainTableTest, MetaInatProtoToCosine) {
  const GainTable t =
      gain_table(grid_file("meta_inat_conv_4__proto"), grid_file("meta_inat_conv_4__cosine_proto"));
  const double expected[] = {13.33, 6.65, 2.48, 0.67, -0.07, -0.39};
  ASSERT_EQ(t.gains.size(), 6);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(t.gains(i), expected[i], 0.03) << i;
  EXPECT_EQ(t.test_shots, kTestShots);
}

TEST(GainTableTest, EqualsDifferenceOfRowMeans) {
  Gen gen(25);
  const AccuracyGrid a = random_grid(gen, 5, 3), b = random_grid(gen, 5, 3);
  const GainTable t = gain_table(a, b);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(t.gains(i), b.values().row(i).mean() - a.values().row(i).mean(), 1e-12);
    EXPECT_EQ(t.gains(i), t.cosine_means(i) - t.euclidean_means(i));
  }
  EXPECT_EQ(gain_table(a, a).gains.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GainTableTest, AxisMismatch) {
  const Matrix v = Matrix::Constant(2, 2, 50.0);
  const AccuracyGrid a(v, {1, 2}, {4, 8}), b(v, {1, 2}, {4, 16}), c(v, {1, 3}, {4, 8});
  for (const AccuracyGrid* other : {&b, &c}) {
    try {
      gain_table(a, *other);
      ADD_FAILURE() << "expected AxisMismatch";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::AxisMismatch);
    }
  }
}

}  // namespace
}  // namespace shotmetric
