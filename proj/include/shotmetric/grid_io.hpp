#pragma once

// CSV formats for accuracy grids, sensitivity reports and gain tables.
//
// Grid:
//   test_shot\train_shot,4,8,16,32
//   1,57.47,53.48,45.69,39.53
//   ...
//
// Report (body holds the corrected heatmap):
//   # label = <label>
//   # score = <score>
//   test_shot\train_shot,4,8,16,32,mean
//   1,<heatmap row>,<row mean>
//   ...
//   offset,<model bias>,<score>
//
// Lines starting with '#' and blank lines are ignored by the readers. Numbers
// are written in shortest round-trip form, so files carry full precision.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "shotmetric/shot_sensitivity.hpp"

namespace shotmetric {

inline constexpr std::string_view kGridCorner = "test_shot\\train_shot";

AccuracyGrid parse_grid_csv(std::istream& in, std::string label = {});
AccuracyGrid read_grid_csv(const std::filesystem::path& path);
void write_grid_csv(std::ostream& out, const AccuracyGrid& grid);

void write_report_csv(std::ostream& out, const AccuracyGrid& grid,
                      const SensitivityReport& report);

struct ParsedReport {
  std::string label;
  std::vector<int> test_shots;
  std::vector<int> train_shots;
  Matrix heatmap;
  Vector row_means;
  Vector model_bias;
  double score = 0.0;
};

ParsedReport parse_report_csv(std::istream& in);

void write_gain_csv(std::ostream& out, const GainTable& table);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Fixed two-decimal rendering used for human-readable tables.
std::string format_2dp(double value);

}  // namespace shotmetric
