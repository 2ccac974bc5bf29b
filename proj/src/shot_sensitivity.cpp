#include "shotmetric/shot_sensitivity.hpp"

#include <algorithm>

#include "shotmetric/error.hpp"

namespace shotmetric {

namespace {

void check_axis(const std::vector<int>& axis, Eigen::Index expected, const char* name) {
  if (static_cast<Eigen::Index>(axis.size()) != expected) {
    throw Error(ErrorKind::InvalidInput, std::string(name) + " axis length does not match grid");
  }
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (axis[i] < 1) {
      throw Error(ErrorKind::InvalidInput, std::string(name) + " shots must be positive");
    }
    if (i > 0 && axis[i] <= axis[i - 1]) {
      throw Error(ErrorKind::InvalidInput, std::string(name) + " shots must be strictly ascending");
    }
  }
}

}  // namespace

AccuracyGrid::AccuracyGrid(Matrix values, std::vector<int> test_shots,
                           std::vector<int> train_shots, std::string label)
    : values_(std::move(values)),
      test_shots_(std::move(test_shots)),
      train_shots_(std::move(train_shots)),
      label_(std::move(label)) {
  if (values_.rows() < 2 || values_.cols() < 2) {
    throw Error(ErrorKind::InvalidInput, "accuracy grid must be at least 2 x 2");
  }
  check_axis(test_shots_, values_.rows(), "test shot");
  check_axis(train_shots_, values_.cols(), "train shot");
  if (!values_.allFinite() || values_.minCoeff() < 0.0 || values_.maxCoeff() > 100.0) {
    throw Error(ErrorKind::InvalidInput, "accuracies must be finite percentages in [0, 100]");
  }
}

SensitivityReport decompose(const AccuracyGrid& grid) {
  const Matrix& v = grid.values();
  SensitivityReport r;
  r.row_means = v.rowwise().mean();
  r.offsets = v.colwise() - r.row_means;
  r.model_bias = r.offsets.colwise().mean().transpose();
  r.heatmap = r.offsets.rowwise() - r.model_bias.transpose();
  r.score = r.heatmap.maxCoeff() - r.heatmap.minCoeff();
  return r;
}

double sensitivity_score(const AccuracyGrid& grid) { return decompose(grid).score; }

GainTable gain_table(const AccuracyGrid& euclidean, const AccuracyGrid& cosine) {
  if (euclidean.test_shots() != cosine.test_shots() ||
      euclidean.train_shots() != cosine.train_shots()) {
    throw Error(ErrorKind::AxisMismatch, "paired grids must share test and train shot axes");
  }
  GainTable t;
  t.test_shots = euclidean.test_shots();
  t.euclidean_means = euclidean.values().rowwise().mean();
  t.cosine_means = cosine.values().rowwise().mean();
  t.gains = t.cosine_means - t.euclidean_means;
  return t;
}

}  // namespace shotmetric
