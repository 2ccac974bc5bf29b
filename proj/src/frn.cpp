#include "shotmetric/frn.hpp"

#include <cmath>
#include <limits>

#include "shotmetric/error.hpp"
#include "shotmetric/random.hpp"

namespace shotmetric {

FeaturePool::FeaturePool(Matrix features) : features_(std::move(features)) {
  if (features_.rows() < 1 || features_.cols() < 1) {
    throw Error(ErrorKind::InvalidInput, "feature pool needs at least one row and one column");
  }
  if (!features_.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "feature pool entries must be finite");
  }
}

double ridge_coefficient(const FeaturePool& support, double lambda, Regularizer regularizer) {
  double rho = 0.0;
  if (regularizer == Regularizer::legacy) {
    rho = lambda * static_cast<double>(support.rows()) / static_cast<double>(support.dim());
  } else {
    const double norm = support.covariance().norm();
    if (norm == 0.0) {
      throw Error(ErrorKind::ZeroSupport, "support covariance has zero Frobenius norm");
    }
    rho = lambda * norm;
  }
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw Error(ErrorKind::NumericalFailure, "ridge coefficient is not a positive finite number");
  }
  return rho;
}

namespace {

void check_dims(const FeaturePool& support, const FeaturePool& query) {
  if (support.dim() != query.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "support has dimension " +
                                                  std::to_string(support.dim()) + ", query has " +
                                                  std::to_string(query.dim()));
  }
}

Eigen::LLT<Matrix> factor_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "Cholesky factorization of the ridge system failed");
  }
  return llt;
}

// Everything a support pool contributes to the covariance-form logits.
struct SupportModel {
  Matrix sigma_s;
  Matrix shrink;  // X = (Sigma_S + rho I)^-1 Sigma_S
  double rho = 0.0;
};

SupportModel make_support_model(const FeaturePool& support, const HeadConfig& config) {
  config.validate();
  SupportModel m;
  m.rho = ridge_coefficient(support, config.frn_lambda, config.frn_regularizer);
  m.sigma_s = support.covariance();
  Matrix system = m.sigma_s;
  system.diagonal().array() += m.rho;
  m.shrink = factor_spd(system).solve(m.sigma_s);
  return m;
}

// The three terms are each of order tr(Sigma_Q) while their sum can be far
// smaller, so they are formed and combined in extended precision.
double full_logit(const SupportModel& m, const Matrix& sigma_q) {
  using Wide = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const Wide x = m.shrink.cast<long double>();
  const Wide sq = sigma_q.cast<long double>();
  const long double first = x.cwiseProduct(sq).sum();
  const long double third = (x * sq).cwiseProduct(x).sum();
  return static_cast<double>(2.0L * first - sq.trace() - third);
}

double simplified_logit(const SupportModel& m, const Matrix& sigma_q) {
  return frobenius_inner(m.shrink, sigma_q);
}

double term_ratio(const SupportModel& m, const Matrix& sigma_q) {
  const double numerator = 2.0 * frobenius_inner(m.shrink, sigma_q);
  const double denominator = frobenius_inner(m.shrink * sigma_q, m.shrink);
  if (!(std::abs(denominator) >= 1e-12)) {
    throw Error(ErrorKind::DegenerateRatio,
                "third expansion term is " + std::to_string(denominator) + " (below 1e-12)");
  }
  return numerator / denominator;
}

double cosine_logit(const Matrix& support, double support_cov_norm, const Matrix& query) {
  const double query_cov_norm = (query.transpose() * query).norm();
  if (query_cov_norm == 0.0) {
    throw Error(ErrorKind::ZeroQuery, "query covariance has zero Frobenius norm");
  }
  // <S^T S, Q^T Q>_F == ||Q S^T||_F^2, which is non-negative by construction.
  const double inner = (query * support.transpose()).squaredNorm();
  return std::min(1.0, inner / (support_cov_norm * query_cov_norm));
}

}  // namespace

ReconstructionResult frn_reconstruct(const FeaturePool& support, const FeaturePool& query,
                                     const HeadConfig& config, InverseBranch branch) {
  config.validate();
  check_dims(support, query);
  const Matrix& s = support.features();
  const Matrix& q = query.features();

  ReconstructionResult out;
  out.rho = ridge_coefficient(support, config.frn_lambda, config.frn_regularizer);

  if (branch == InverseBranch::automatic) {
    branch = support.rows() <= support.dim() ? InverseBranch::rows : InverseBranch::features;
  }
  if (branch == InverseBranch::rows) {
    Matrix gram = s * s.transpose();
    gram.diagonal().array() += out.rho;
    // (S S^T + rho I) W^T = S Q^T
    out.weights = factor_spd(gram).solve(s * q.transpose()).transpose();
  } else {
    Matrix cov = s.transpose() * s;
    cov.diagonal().array() += out.rho;
    // (S^T S + rho I) Y = Q^T, W = Y^T S^T
    out.weights = factor_spd(cov).solve(q.transpose()).transpose() * s.transpose();
  }
  out.reconstruction = out.weights * s;
  return out;
}

double frn_logit_full(const FeaturePool& support, const FeaturePool& query,
                      const HeadConfig& config) {
  check_dims(support, query);
  return full_logit(make_support_model(support, config), query.covariance());
}

double frn_logit_simplified(const FeaturePool& support, const FeaturePool& query,
                            const HeadConfig& config) {
  check_dims(support, query);
  return simplified_logit(make_support_model(support, config), query.covariance());
}

double frn_logit_cosine(const FeaturePool& support, const FeaturePool& query) {
  check_dims(support, query);
  const double support_norm = support.covariance().norm();
  if (support_norm == 0.0) {
    throw Error(ErrorKind::ZeroSupport, "support covariance has zero Frobenius norm");
  }
  return cosine_logit(support.features(), support_norm, query.features());
}

double frn_term_ratio(const FeaturePool& support, const FeaturePool& query,
                      const HeadConfig& config) {
  check_dims(support, query);
  return term_ratio(make_support_model(support, config), query.covariance());
}

Matrix frn_episode_logits(const Episode& episode, const HeadConfig& config) {
  config.validate();
  const auto m = static_cast<Eigen::Index>(episode.num_queries());
  const auto n = static_cast<Eigen::Index>(episode.way());
  Matrix out(m, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const FeaturePool support(episode.support(static_cast<std::size_t>(c)));
    if (config.head == HeadKind::frn_cosine) {
      const double support_norm = support.covariance().norm();
      if (support_norm == 0.0) {
        throw Error(ErrorKind::ZeroSupport, "class '" + episode.class_ids()[c] +
                                                "' has zero support covariance");
      }
      for (Eigen::Index q = 0; q < m; ++q) {
        const Matrix row = episode.query().row(q);
        out(q, c) = cosine_logit(support.features(), support_norm, row);
      }
      continue;
    }
    const SupportModel model = make_support_model(support, config);
    for (Eigen::Index q = 0; q < m; ++q) {
      const Matrix row = episode.query().row(q);
      const Matrix sigma_q = row.transpose() * row;
      out(q, c) = config.head == HeadKind::frn_full ? full_logit(model, sigma_q)
                                                    : simplified_logit(model, sigma_q);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random-instance property harnesses.

namespace {

constexpr std::uint32_t kInvarianceRole = 0x494e56;  // "INV"
constexpr std::uint32_t kBranchRole = 0x425243;      // "BRC"
constexpr std::uint32_t kExpansionRole = 0x455850;   // "EXP"

double log_uniform(StreamRng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

Matrix tile_columns(const Matrix& m) {
  Matrix out(m.rows(), 2 * m.cols());
  out << m, m;
  return out;
}

Matrix repeat_rows(const Matrix& m) {
  Matrix out(2 * m.rows(), m.cols());
  out << m, m;
  return out;
}

void record(PropertyResult& result, double deviation, double tolerance) {
  ++result.trials;
  if (!(deviation <= tolerance)) result.passed = false;
  if (!(deviation <= result.worst_deviation)) result.worst_deviation = deviation;
}

PropertyResult fresh(std::string name) {
  PropertyResult r;
  r.name = std::move(name);
  r.passed = true;
  return r;
}

}  // namespace

InvarianceReport check_invariances(std::size_t trials, std::uint64_t seed,
                                   Regularizer regularizer) {
  if (trials < 1) throw Error(ErrorKind::InvalidInput, "trials must be >= 1");
  InvarianceReport report;
  report.regularizer = regularizer;
  report.shot_invariance = fresh("shot invariance");
  report.scale_equivariance = fresh("scale equivariance");
  report.dimension_equivariance = fresh("dimensionality equivariance");

  for (std::size_t t = 0; t < trials; ++t) {
    StreamRng rng(seed, t, kInvarianceRole);
    const auto ns = rng.uniform_int(1, 16);
    const auto d = rng.uniform_int(1, 16);
    const auto mq = rng.uniform_int(1, 4);
    HeadConfig config;
    config.frn_lambda = log_uniform(rng, 1e-2, 2.0);
    config.frn_regularizer = regularizer;
    const double alpha = rng.uniform(0.5, 4.0);
    const Matrix s = rng.normal_matrix(ns, d);
    const Matrix q = rng.normal_matrix(mq, d);

    const Matrix base = frn_reconstruct(FeaturePool(s), FeaturePool(q), config).reconstruction;

    const Matrix shot =
        frn_reconstruct(FeaturePool(repeat_rows(s)), FeaturePool(q), config).reconstruction;
    record(report.shot_invariance, relative_error(shot, base), kIdentityTolerance);

    const Matrix scaled =
        frn_reconstruct(FeaturePool(alpha * s), FeaturePool(alpha * q), config).reconstruction;
    record(report.scale_equivariance, relative_error(scaled, Matrix(alpha * base)),
           kIdentityTolerance);

    const Matrix wide =
        frn_reconstruct(FeaturePool(tile_columns(s)), FeaturePool(tile_columns(q)), config)
            .reconstruction;
    record(report.dimension_equivariance, relative_error(wide, tile_columns(base)),
           kIdentityTolerance);
  }
  return report;
}

PropertyResult check_branch_agreement(std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorKind::InvalidInput, "trials must be >= 1");
  PropertyResult result = fresh("woodbury branch agreement");
  for (std::size_t t = 0; t < trials; ++t) {
    StreamRng rng(seed, t, kBranchRole);
    const auto ns = rng.uniform_int(1, 40);
    const auto d = rng.uniform_int(1, 40);
    const auto mq = rng.uniform_int(1, 5);
    HeadConfig config;
    config.frn_lambda = log_uniform(rng, 1e-3, 10.0);
    config.frn_regularizer = t % 2 == 0 ? Regularizer::frobenius : Regularizer::legacy;
    const FeaturePool s(rng.normal_matrix(ns, d));
    const FeaturePool q(rng.normal_matrix(mq, d));
    const Matrix by_rows = frn_reconstruct(s, q, config, InverseBranch::rows).weights;
    const Matrix by_features = frn_reconstruct(s, q, config, InverseBranch::features).weights;
    record(result, relative_error(by_rows, by_features), kBranchTolerance);
  }
  return result;
}

PropertyResult check_expansion_identity(std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorKind::InvalidInput, "trials must be >= 1");
  PropertyResult result = fresh("logit expansion identity");
  for (std::size_t t = 0; t < trials; ++t) {
    StreamRng rng(seed, t, kExpansionRole);
    const auto ns = rng.uniform_int(1, 40);
    const auto d = rng.uniform_int(1, 40);
    const auto mq = rng.uniform_int(1, 5);
    HeadConfig config;
    config.frn_lambda = log_uniform(rng, 1e-3, 10.0);
    config.frn_regularizer = t % 2 == 0 ? Regularizer::frobenius : Regularizer::legacy;
    const FeaturePool s(rng.normal_matrix(ns, d));
    const FeaturePool q(rng.normal_matrix(mq, d));
    const Matrix residual = frn_reconstruct(s, q, config).reconstruction - q.features();
    const double direct = -residual.squaredNorm();
    record(result, relative_error(frn_logit_full(s, q, config), direct), kIdentityTolerance);
  }
  return result;
}

}  // namespace shotmetric
