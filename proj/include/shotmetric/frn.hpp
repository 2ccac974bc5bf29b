#pragma once

// Feature-map reconstruction heads.
//
// A class's support pool S (n_s x d) reconstructs a query pool Q (m_q x d)
// by ridge regression, W = argmin ||Q - W S||^2 + rho ||W||^2, with
//
//   rho = lambda * ||S^T S||_F     (Regularizer::frobenius)
//   rho = lambda * n_s / d         (Regularizer::legacy)
//
// Writing Sigma_S = S^T S, Sigma_Q = Q^T Q and X = (Sigma_S + rho I)^-1 Sigma_S,
// the negative squared residual expands to
//
//   -||W S - Q||^2 = 2 <X, Sigma_Q>_F - tr(Sigma_Q) - tr(X Sigma_Q X^T)
//
// where <A, B>_F is the sum of entries of the elementwise product A (*) B.
// That sum is what the "||A (*) B||_1" notation in the usual write-up of this
// expansion denotes: it must equal tr(A^T B) for the identity to hold, so no
// absolute values are taken anywhere below.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shotmetric/linalg.hpp"
#include "shotmetric/metric_heads.hpp"

namespace shotmetric {

/// Rows are pooled feature vectors. Requires at least one row, at least one
/// column and finite entries.
class FeaturePool {
 public:
  explicit FeaturePool(Matrix features);

  const Matrix& features() const noexcept { return features_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }

  /// Gram matrix S^T S (d x d).
  Matrix covariance() const { return features_.transpose() * features_; }

 private:
  Matrix features_;
};

struct ReconstructionResult {
  Matrix weights;         // (m_q x n_s)
  Matrix reconstruction;  // (m_q x d), weights * support
  double rho = 0.0;
};

enum class InverseBranch {
  automatic,   // rows when n_s <= d, features otherwise
  rows,        // Q S^T (S S^T + rho I_n)^-1
  features,    // Q (S^T S + rho I_d)^-1 S^T
};

/// Ridge coefficient actually applied for this support pool.
double ridge_coefficient(const FeaturePool& support, double lambda, Regularizer regularizer);

ReconstructionResult frn_reconstruct(const FeaturePool& support, const FeaturePool& query,
                                     const HeadConfig& config,
                                     InverseBranch branch = InverseBranch::automatic);

/// Covariance expansion of -||W S - Q||^2.
double frn_logit_full(const FeaturePool& support, const FeaturePool& query,
                      const HeadConfig& config);

/// <X, Sigma_Q>_F, the first expansion term without its factor of two.
double frn_logit_simplified(const FeaturePool& support, const FeaturePool& query,
                            const HeadConfig& config);

/// <Sigma_S, Sigma_Q>_F / (||Sigma_S||_F ||Sigma_Q||_F), in [0, 1].
double frn_logit_cosine(const FeaturePool& support, const FeaturePool& query);

/// 2 <X, Sigma_Q>_F / tr(X Sigma_Q X^T): how close the dropped third term is
/// to being proportional to the kept first term.
double frn_term_ratio(const FeaturePool& support, const FeaturePool& query,
                      const HeadConfig& config);

struct PropertyResult {
  std::string name;
  bool passed = false;
  double worst_deviation = 0.0;  // relative, see relative_error()
  std::size_t trials = 0;
};

struct InvarianceReport {
  Regularizer regularizer = Regularizer::frobenius;
  PropertyResult shot_invariance;
  PropertyResult scale_equivariance;
  PropertyResult dimension_equivariance;

  bool all_passed() const noexcept {
    return shot_invariance.passed && scale_equivariance.passed && dimension_equivariance.passed;
  }
};

inline constexpr double kIdentityTolerance = 1e-8;
inline constexpr double kBranchTolerance = 1e-9;

/// Random-instance checks of the three reconstruction symmetries: duplicating
/// support rows, scaling both pools by alpha, and concatenating every feature
/// vector to itself.
InvarianceReport check_invariances(std::size_t trials, std::uint64_t seed,
                                   Regularizer regularizer = Regularizer::frobenius);

/// Rows-branch vs features-branch weights over random instances with
/// n_s, d in [1, 40] and lambda in [1e-3, 10] (log-uniform).
PropertyResult check_branch_agreement(std::size_t trials, std::uint64_t seed);

/// frn_logit_full vs the directly computed residual over random instances.
PropertyResult check_expansion_identity(std::size_t trials, std::uint64_t seed);

/// Per-query, per-class FRN logits for an episode (unscaled by temperature).
Matrix frn_episode_logits(const Episode& episode, const HeadConfig& config);

}  // namespace shotmetric
