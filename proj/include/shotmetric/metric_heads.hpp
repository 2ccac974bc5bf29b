#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shotmetric/linalg.hpp"

namespace shotmetric {

/// One few-shot task: per-class support feature matrices plus a shared query
/// matrix. Rows are feature vectors. Validated on construction and immutable
/// afterwards.
class Episode {
 public:
  Episode(std::vector<std::string> class_ids, std::vector<Matrix> support, Matrix query);

  const std::vector<std::string>& class_ids() const noexcept { return class_ids_; }
  const std::vector<Matrix>& support() const noexcept { return support_; }
  const Matrix& support(std::size_t c) const { return support_.at(c); }
  const Matrix& query() const noexcept { return query_; }

  std::size_t way() const noexcept { return class_ids_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(query_.cols()); }
  std::size_t num_queries() const noexcept { return static_cast<std::size_t>(query_.rows()); }

 private:
  std::vector<std::string> class_ids_;
  std::vector<Matrix> support_;
  Matrix query_;
};

enum class HeadKind { proto_euclidean, proto_cosine, frn_full, frn_simplified, frn_cosine };
enum class Regularizer { frobenius, legacy };

std::string_view to_string(HeadKind head) noexcept;
std::string_view to_string(Regularizer reg) noexcept;
std::optional<HeadKind> parse_head_kind(std::string_view name) noexcept;
std::optional<Regularizer> parse_regularizer(std::string_view name) noexcept;

struct HeadConfig {
  double temperature = 1.0;  // sigma
  double frn_lambda = 0.5;   // lambda, FRN heads only
  Regularizer frn_regularizer = Regularizer::frobenius;
  HeadKind head = HeadKind::proto_euclidean;
  double zero_norm_eps = 1e-12;  // cosine heads reject vectors with norm below this

  /// Throws Error(InvalidInput) unless temperature > 0 and frn_lambda > 0.
  void validate() const;
};

/// Per-query, per-class scores before the softmax. scores is (m x n).
struct ClassLogits {
  Matrix scores;
  std::vector<std::string> class_ids;
};

struct Predictions {
  std::vector<std::size_t> class_index;  // argmax per query, lowest index wins ties
  Matrix probabilities;                  // (m x n), softmax rows

  const std::string& class_id(const ClassLogits& logits, std::size_t query) const {
    return logits.class_ids.at(class_index.at(query));
  }
};

/// Inference-time weights for the single-head FEAT-style refinement block.
struct FeatWeights {
  Matrix w_q;
  Matrix w_k;
  Matrix w_v;
  bool layer_norm = false;
  Vector ln_gain;
  Vector ln_bias;
};

/// Row c is the mean of class c's support rows.
Matrix compute_prototypes(const Episode& episode);

/// -(sigma/d) * ||x_q - mu_c||^2 with d the feature dimension.
Matrix euclidean_logits(const Matrix& queries, const Matrix& prototypes, double temperature);

/// sigma * cos(x_q, mu_c). Throws ZeroNormVector when any query or prototype
/// has norm below `eps`.
Matrix cosine_logits(const Matrix& queries, const Matrix& prototypes, double temperature,
                     double eps = 1e-12);

ClassLogits euclidean_proto_logits(const Episode& episode, const HeadConfig& config);
ClassLogits cosine_proto_logits(const Episode& episode, const HeadConfig& config);

/// Single-head self-attention over the prototype rows with a residual
/// connection, optionally followed by a per-row LayerNorm.
Matrix feat_refine(const Matrix& prototypes, const FeatWeights& weights);

/// Row-wise softmax, max-shifted for stability.
Matrix softmax_rows(const Matrix& logits);

Predictions predict(const ClassLogits& logits);

/// Dispatches on config.head. FRN heads treat each class's stacked support
/// rows as the support pool and each query row as a one-row query pool; their
/// logits are multiplied by config.temperature.
ClassLogits classify(const Episode& episode, const HeadConfig& config);

}  // namespace shotmetric
