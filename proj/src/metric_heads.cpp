#include "shotmetric/metric_heads.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "shotmetric/error.hpp"
#include "shotmetric/frn.hpp"

namespace shotmetric {

Episode::Episode(std::vector<std::string> class_ids, std::vector<Matrix> support, Matrix query)
    : class_ids_(std::move(class_ids)), support_(std::move(support)), query_(std::move(query)) {
  if (class_ids_.size() < 2) {
    throw Error(ErrorKind::InvalidInput, "episode needs at least two classes");
  }
  if (support_.size() != class_ids_.size()) {
    throw Error(ErrorKind::InvalidInput, "one support matrix per class id is required");
  }
  if (std::set<std::string>(class_ids_.begin(), class_ids_.end()).size() != class_ids_.size()) {
    throw Error(ErrorKind::InvalidInput, "class ids must be distinct");
  }
  if (query_.rows() < 1 || query_.cols() < 1) {
    throw Error(ErrorKind::InvalidInput, "episode needs at least one query of dimension >= 1");
  }
  if (!query_.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "query features must be finite");
  }
  for (std::size_t c = 0; c < support_.size(); ++c) {
    const Matrix& s = support_[c];
    if (s.rows() < 1) {
      throw Error(ErrorKind::InvalidInput, "class '" + class_ids_[c] + "' has no support rows");
    }
    if (s.cols() != query_.cols()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "class '" + class_ids_[c] + "' has dimension " + std::to_string(s.cols()) +
                      ", queries have " + std::to_string(query_.cols()));
    }
    if (!s.allFinite()) {
      throw Error(ErrorKind::InvalidInput, "support features must be finite");
    }
  }
}

std::string_view to_string(HeadKind head) noexcept {
  switch (head) {
    case HeadKind::proto_euclidean: return "proto_euclidean";
    case HeadKind::proto_cosine: return "proto_cosine";
    case HeadKind::frn_full: return "frn_full";
    case HeadKind::frn_simplified: return "frn_simplified";
    case HeadKind::frn_cosine: return "frn_cosine";
  }
  return "unknown";
}

std::string_view to_string(Regularizer reg) noexcept {
  return reg == Regularizer::frobenius ? "frobenius" : "legacy";
}

std::optional<HeadKind> parse_head_kind(std::string_view name) noexcept {
  for (HeadKind h : {HeadKind::proto_euclidean, HeadKind::proto_cosine, HeadKind::frn_full,
                     HeadKind::frn_simplified, HeadKind::frn_cosine}) {
    if (to_string(h) == name) return h;
  }
  return std::nullopt;
}

std::optional<Regularizer> parse_regularizer(std::string_view name) noexcept {
  if (name == "frobenius") return Regularizer::frobenius;
  if (name == "legacy") return Regularizer::legacy;
  return std::nullopt;
}

void HeadConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::InvalidInput, "temperature must be positive and finite");
  }
  if (!(frn_lambda > 0.0) || !std::isfinite(frn_lambda)) {
    throw Error(ErrorKind::InvalidInput, "frn_lambda must be positive and finite");
  }
  if (!(zero_norm_eps >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "zero_norm_eps must be non-negative");
  }
}

Matrix compute_prototypes(const Episode& episode) {
  Matrix protos(static_cast<Eigen::Index>(episode.way()), static_cast<Eigen::Index>(episode.dim()));
  std::vector<double> column;
  for (std::size_t c = 0; c < episode.way(); ++c) {
    const Matrix& s = episode.support(c);
    column.resize(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      // Summing in sorted order makes the mean independent of row order.
      for (Eigen::Index i = 0; i < s.rows(); ++i) column[static_cast<std::size_t>(i)] = s(i, j);
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (double v : column) sum += v;
      protos(static_cast<Eigen::Index>(c), j) = sum / static_cast<double>(s.rows());
    }
  }
  return protos;
}

Matrix euclidean_logits(const Matrix& queries, const Matrix& prototypes, double temperature) {
  if (queries.cols() != prototypes.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "queries and prototypes differ in dimension");
  }
  const double scale = temperature / static_cast<double>(queries.cols());
  Matrix out(queries.rows(), prototypes.rows());
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (Eigen::Index c = 0; c < prototypes.rows(); ++c) {
      out(q, c) = -scale * (queries.row(q) - prototypes.row(c)).squaredNorm();
    }
  }
  return out;
}

namespace {

Matrix normalized_rows(const Matrix& m, double eps, const char* what) {
  Matrix out = m;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (!(norm >= eps) || norm == 0.0) {
      throw Error(ErrorKind::ZeroNormVector,
                  std::string(what) + " row " + std::to_string(r) + " has norm " +
                      std::to_string(norm) + " (below " + std::to_string(eps) + ")");
    }
    out.row(r) /= norm;
  }
  return out;
}

}  // namespace

Matrix cosine_logits(const Matrix& queries, const Matrix& prototypes, double temperature,
                     double eps) {
  if (queries.cols() != prototypes.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "queries and prototypes differ in dimension");
  }
  const Matrix qn = normalized_rows(queries, eps, "query");
  const Matrix pn = normalized_rows(prototypes, eps, "prototype");
  Matrix out = temperature * (qn * pn.transpose());
  // Rounding can push |cos| a hair past 1.
  return out.cwiseMax(-temperature).cwiseMin(temperature);
}

ClassLogits euclidean_proto_logits(const Episode& episode, const HeadConfig& config) {
  config.validate();
  return {euclidean_logits(episode.query(), compute_prototypes(episode), config.temperature),
          episode.class_ids()};
}

ClassLogits cosine_proto_logits(const Episode& episode, const HeadConfig& config) {
  config.validate();
  return {cosine_logits(episode.query(), compute_prototypes(episode), config.temperature,
                        config.zero_norm_eps),
          episode.class_ids()};
}

Matrix feat_refine(const Matrix& prototypes, const FeatWeights& weights) {
  const Eigen::Index d = prototypes.cols();
  for (const Matrix* w : {&weights.w_q, &weights.w_k, &weights.w_v}) {
    if (w->rows() != d || w->cols() != d) {
      throw Error(ErrorKind::DimensionMismatch, "attention weights must be d x d");
    }
  }
  if (weights.layer_norm && (weights.ln_gain.size() != d || weights.ln_bias.size() != d)) {
    throw Error(ErrorKind::DimensionMismatch, "LayerNorm gain and bias must have length d");
  }

  const Matrix q = prototypes * weights.w_q;
  const Matrix k = prototypes * weights.w_k;
  const Matrix v = prototypes * weights.w_v;
  const Matrix attention = softmax_rows((q * k.transpose()) / std::sqrt(static_cast<double>(d)));
  Matrix refined = prototypes + attention * v;

  if (weights.layer_norm) {
    constexpr double kVarianceEps = 1e-6;
    for (Eigen::Index r = 0; r < refined.rows(); ++r) {
      const double mean = refined.row(r).mean();
      refined.row(r).array() -= mean;
      const double var = refined.row(r).squaredNorm() / static_cast<double>(d);
      refined.row(r) /= std::sqrt(var + kVarianceEps);
      refined.row(r) = refined.row(r).cwiseProduct(weights.ln_gain.transpose()) +
                       weights.ln_bias.transpose();
    }
  }
  return refined;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double shift = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - shift).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Predictions predict(const ClassLogits& logits) {
  if (!logits.scores.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "logits must be finite");
  }
  if (static_cast<std::size_t>(logits.scores.cols()) != logits.class_ids.size()) {
    throw Error(ErrorKind::DimensionMismatch, "logit columns must match class ids");
  }
  Predictions out;
  out.probabilities = softmax_rows(logits.scores);
  out.class_index.reserve(static_cast<std::size_t>(logits.scores.rows()));
  for (Eigen::Index r = 0; r < logits.scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.scores.cols(); ++c) {
      if (logits.scores(r, c) > logits.scores(r, best)) best = c;
    }
    out.class_index.push_back(static_cast<std::size_t>(best));
  }
  return out;
}

ClassLogits classify(const Episode& episode, const HeadConfig& config) {
  switch (config.head) {
    case HeadKind::proto_euclidean:
      return euclidean_proto_logits(episode, config);
    case HeadKind::proto_cosine:
      return cosine_proto_logits(episode, config);
    case HeadKind::frn_full:
    case HeadKind::frn_simplified:
    case HeadKind::frn_cosine:
      config.validate();
      return {config.temperature * frn_episode_logits(episode, config), episode.class_ids()};
  }
  throw Error(ErrorKind::InvalidInput, "unknown head");
}

}  // namespace shotmetric
