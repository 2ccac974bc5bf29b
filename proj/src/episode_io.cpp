#include "shotmetric/episode_io.hpp"

#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shotmetric/error.hpp"

namespace shotmetric {

namespace {

using nlohmann::json;

json parse_document(std::istream& in) {
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorKind::ParseError, std::string("missing field '") + key + "'");
  }
  return obj.at(key);
}

double number(const json& v, const char* what) {
  if (!v.is_number()) throw Error(ErrorKind::ParseError, std::string(what) + " must be a number");
  return v.get<double>();
}

Matrix matrix_from(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) {
    throw Error(ErrorKind::ParseError, what + " must be a non-empty array of rows");
  }
  const std::size_t cols = rows.front().is_array() ? rows.front().size() : 0;
  if (cols == 0) throw Error(ErrorKind::ParseError, what + " rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const json& row = rows[r];
    if (!row.is_array() || row.size() != cols) {
      throw Error(ErrorKind::ParseError, what + " row " + std::to_string(r) + " must have " +
                                             std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(row[c], (what + " entry").c_str());
    }
  }
  return m;
}

template <typename Parse>
auto read_file(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  try {
    return parse(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

}  // namespace

Episode parse_episode_json(std::istream& in) {
  const json doc = parse_document(in);
  const json& classes = require(doc, "classes");
  if (!classes.is_array()) throw Error(ErrorKind::ParseError, "'classes' must be an array");
  std::vector<std::string> ids;
  std::vector<Matrix> support;
  for (const json& cls : classes) {
    const json& id = require(cls, "id");
    if (!id.is_string()) throw Error(ErrorKind::ParseError, "class 'id' must be a string");
    ids.push_back(id.get<std::string>());
    support.push_back(matrix_from(require(cls, "support"), "support of '" + ids.back() + "'"));
  }
  return Episode(std::move(ids), std::move(support), matrix_from(require(doc, "query"), "query"));
}

Episode read_episode_json(const std::filesystem::path& path) {
  return read_file(path, [](std::istream& in) { return parse_episode_json(in); });
}

ClusterSpec parse_cluster_spec_json(std::istream& in) {
  const json doc = parse_document(in);
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "cluster spec must be an object");
  if (doc.contains("means")) {
    return ClusterSpec(matrix_from(doc.at("means"), "means"),
                       number(require(doc, "stddev"), "stddev"));
  }
  ClusterGenerator gen;
  const auto count = [&](const char* key) {
    const json& v = require(doc, key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw Error(ErrorKind::ParseError, std::string(key) + " must be a non-negative integer");
    }
    return v.get<unsigned long long>();
  };
  gen.way = count("way");
  gen.dim = count("dim");
  gen.seed = count("seed");
  const json& range = require(doc, "mean_norm_range");
  if (!range.is_array() || range.size() != 2) {
    throw Error(ErrorKind::ParseError, "mean_norm_range must be [lo, hi]");
  }
  gen.norm_lo = number(range[0], "mean_norm_range[0]");
  gen.norm_hi = number(range[1], "mean_norm_range[1]");
  gen.min_angle_deg = number(require(doc, "min_angle_deg"), "min_angle_deg");
  if (doc.contains("stddev")) gen.stddev = number(doc.at("stddev"), "stddev");
  return generate_cluster_spec(gen);
}

ClusterSpec read_cluster_spec_json(const std::filesystem::path& path) {
  return read_file(path, [](std::istream& in) { return parse_cluster_spec_json(in); });
}

}  // namespace shotmetric
