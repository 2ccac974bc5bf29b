#include "shotmetric/grid_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "shotmetric/error.hpp"

namespace shotmetric {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_number(std::string_view cell, std::size_t line_no) {
  double value = 0.0;
  const char* first = cell.data();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
      !std::isfinite(value)) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": '" +
                                          std::string(cell) + "' is not a finite number");
  }
  return value;
}

int parse_shot(std::string_view cell, std::size_t line_no) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": '" +
                                          std::string(cell) + "' is not an integer shot");
  }
  return value;
}

struct Line {
  std::size_t number;
  std::string text;
};

// Data lines plus any "# key = value" comments seen on the way.
struct CsvDocument {
  std::vector<Line> lines;
  std::vector<std::pair<std::string, std::string>> comments;
};

CsvDocument read_document(std::istream& in) {
  CsvDocument doc;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (number == 1 && text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
    const std::string_view t = trim(text);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string_view body = trim(t.substr(1));
      const std::size_t eq = body.find('=');
      if (eq != std::string_view::npos) {
        doc.comments.emplace_back(std::string(trim(body.substr(0, eq))),
                                  std::string(trim(body.substr(eq + 1))));
      }
      continue;
    }
    doc.lines.push_back({number, std::string(t)});
  }
  if (doc.lines.empty()) throw Error(ErrorKind::ParseError, "no data rows");
  return doc;
}

std::vector<int> parse_header(const Line& header, std::size_t trailing) {
  const auto cells = split(header.text);
  if (cells.front() != kGridCorner) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(header.number) +
                                           ": first header cell must be '" +
                                           std::string(kGridCorner) + "'");
  }
  if (cells.size() < 1 + trailing + 1) {
    throw Error(ErrorKind::ParseError, "header has no train shot columns");
  }
  std::vector<int> shots;
  for (std::size_t i = 1; i + trailing < cells.size(); ++i) {
    shots.push_back(parse_shot(cells[i], header.number));
  }
  return shots;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_2dp(double value) {
  char buf[64];
  // Avoid printing "-0.00".
  if (std::abs(value) < 0.005) value = 0.0;
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

AccuracyGrid parse_grid_csv(std::istream& in, std::string label) {
  const CsvDocument doc = read_document(in);
  const std::vector<int> train = parse_header(doc.lines.front(), 0);
  const auto cols = static_cast<Eigen::Index>(train.size());

  std::vector<int> test;
  Matrix values(static_cast<Eigen::Index>(doc.lines.size() - 1), cols);
  for (std::size_t r = 1; r < doc.lines.size(); ++r) {
    const Line& line = doc.lines[r];
    const auto cells = split(line.text);
    if (static_cast<Eigen::Index>(cells.size()) != cols + 1) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line.number) + ": expected " +
                                             std::to_string(cols + 1) + " cells, got " +
                                             std::to_string(cells.size()));
    }
    test.push_back(parse_shot(cells[0], line.number));
    for (Eigen::Index j = 0; j < cols; ++j) {
      values(static_cast<Eigen::Index>(r - 1), j) =
          parse_number(cells[static_cast<std::size_t>(j) + 1], line.number);
    }
  }
  if (label.empty()) {
    for (const auto& [key, value] : doc.comments) {
      if (key == "label") label = value;
    }
  }
  return AccuracyGrid(std::move(values), std::move(test), train, std::move(label));
}

AccuracyGrid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  try {
    return parse_grid_csv(in, {});
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

void write_grid_csv(std::ostream& out, const AccuracyGrid& grid) {
  if (!grid.label().empty()) out << "# label = " << grid.label() << '\n';
  out << kGridCorner;
  for (int s : grid.train_shots()) out << ',' << s;
  out << '\n';
  for (Eigen::Index i = 0; i < grid.values().rows(); ++i) {
    out << grid.test_shots()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < grid.values().cols(); ++j) {
      out << ',' << format_double(grid.values()(i, j));
    }
    out << '\n';
  }
}

void write_report_csv(std::ostream& out, const AccuracyGrid& grid,
                      const SensitivityReport& report) {
  if (!grid.label().empty()) out << "# label = " << grid.label() << '\n';
  out << "# score = " << format_double(report.score) << '\n';
  out << kGridCorner;
  for (int s : grid.train_shots()) out << ',' << s;
  out << ",mean\n";
  for (Eigen::Index i = 0; i < report.heatmap.rows(); ++i) {
    out << grid.test_shots()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < report.heatmap.cols(); ++j) {
      out << ',' << format_double(report.heatmap(i, j));
    }
    out << ',' << format_double(report.row_means(i)) << '\n';
  }
  out << "offset";
  for (Eigen::Index j = 0; j < report.model_bias.size(); ++j) {
    out << ',' << format_double(report.model_bias(j));
  }
  out << ',' << format_double(report.score) << '\n';
}

ParsedReport parse_report_csv(std::istream& in) {
  const CsvDocument doc = read_document(in);
  ParsedReport r;
  for (const auto& [key, value] : doc.comments) {
    if (key == "label") r.label = value;
  }
  r.train_shots = parse_header(doc.lines.front(), 1);
  const auto cols = static_cast<Eigen::Index>(r.train_shots.size());
  if (doc.lines.size() < 3) throw Error(ErrorKind::ParseError, "report has no body rows");

  const auto rows = static_cast<Eigen::Index>(doc.lines.size() - 2);
  r.heatmap.resize(rows, cols);
  r.row_means.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Line& line = doc.lines[static_cast<std::size_t>(i) + 1];
    const auto cells = split(line.text);
    if (static_cast<Eigen::Index>(cells.size()) != cols + 2) {
      throw Error(ErrorKind::ParseError,
                  "line " + std::to_string(line.number) + ": wrong number of cells");
    }
    r.test_shots.push_back(parse_shot(cells[0], line.number));
    for (Eigen::Index j = 0; j < cols; ++j) {
      r.heatmap(i, j) = parse_number(cells[static_cast<std::size_t>(j) + 1], line.number);
    }
    r.row_means(i) = parse_number(cells.back(), line.number);
  }

  const Line& last = doc.lines.back();
  const auto cells = split(last.text);
  if (cells.front() != "offset" || static_cast<Eigen::Index>(cells.size()) != cols + 2) {
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(last.number) + ": expected the offset row");
  }
  r.model_bias.resize(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    r.model_bias(j) = parse_number(cells[static_cast<std::size_t>(j) + 1], last.number);
  }
  r.score = parse_number(cells.back(), last.number);
  return r;
}

void write_gain_csv(std::ostream& out, const GainTable& table) {
  out << "test_shot,euclidean_mean,cosine_mean,gain\n";
  for (std::size_t i = 0; i < table.test_shots.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << table.test_shots[i] << ',' << format_double(table.euclidean_means(k)) << ','
        << format_double(table.cosine_means(k)) << ',' << format_double(table.gains(k)) << '\n';
  }
}

}  // namespace shotmetric
