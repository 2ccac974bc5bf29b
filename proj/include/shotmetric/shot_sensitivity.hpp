#pragma once

// Shot-sensitivity decomposition of a test-shot x train-shot accuracy grid:
//
//   accuracy[i][j] = row_mean[i] + model_bias[j] + heatmap[i][j]
//
// row_mean is the per-test-shot bias (mean over models), model_bias the mean
// offset of each model from its group, and the heatmap whatever depends on the
// pairing of train and test shot. The sensitivity score is the spread of the
// heatmap, max - min.

#include <string>
#include <vector>

#include "shotmetric/linalg.hpp"

namespace shotmetric {

/// Percent accuracies, rows indexed by test shot and columns by train shot.
/// Requires T >= 2 and J >= 2, strictly ascending positive shot axes and
/// finite values in [0, 100].
class AccuracyGrid {
 public:
  AccuracyGrid(Matrix values, std::vector<int> test_shots, std::vector<int> train_shots,
               std::string label = {});

  const Matrix& values() const noexcept { return values_; }
  const std::vector<int>& test_shots() const noexcept { return test_shots_; }
  const std::vector<int>& train_shots() const noexcept { return train_shots_; }
  const std::string& label() const noexcept { return label_; }

 private:
  Matrix values_;
  std::vector<int> test_shots_;
  std::vector<int> train_shots_;
  std::string label_;
};

struct SensitivityReport {
  Vector row_means;    // length T, test-shot bias
  Matrix offsets;      // T x J, values minus row means
  Vector model_bias;   // length J, column means of offsets
  Matrix heatmap;      // T x J, offsets minus model bias
  double score = 0.0;  // max(heatmap) - min(heatmap)
};

SensitivityReport decompose(const AccuracyGrid& grid);

double sensitivity_score(const AccuracyGrid& grid);

struct GainTable {
  std::vector<int> test_shots;
  Vector euclidean_means;
  Vector cosine_means;
  Vector gains;  // cosine - euclidean, per test shot
};

/// Throws Error(AxisMismatch) unless both grids share identical axes.
GainTable gain_table(const AccuracyGrid& euclidean, const AccuracyGrid& cosine);

}  // namespace shotmetric
