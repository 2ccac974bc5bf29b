#pragma once

// Seeded Gaussian-cluster episodes and the Monte Carlo experiments built on
// them. Every random draw comes from a StreamRng keyed by
// (seed, trial, role), so a trial is reproducible on its own and resampling
// one role never perturbs another.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "shotmetric/linalg.hpp"
#include "shotmetric/metric_heads.hpp"

namespace shotmetric {

enum class StreamRole : std::uint32_t {
  support = 0,
  support_resample = 1,
  query = 2,
};

/// Isotropic Gaussian class clusters: class c is N(means.row(c), stddev^2 I).
class ClusterSpec {
 public:
  ClusterSpec(Matrix means, double stddev);

  const Matrix& means() const noexcept { return means_; }
  double stddev() const noexcept { return stddev_; }
  std::size_t way() const noexcept { return static_cast<std::size_t>(means_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(means_.cols()); }

 private:
  Matrix means_;
  double stddev_;
};

struct ClusterGenerator {
  std::size_t way = 5;
  std::size_t dim = 16;
  double norm_lo = 0.5;
  double norm_hi = 2.0;
  double min_angle_deg = 45.0;
  std::uint64_t seed = 11;
  double stddev = 0.6;
};

/// Class means with norms uniform in [norm_lo, norm_hi] and unit directions at
/// pairwise angle >= min_angle_deg (rejection sampling on the sphere).
ClusterSpec generate_cluster_spec(const ClusterGenerator& gen);

/// 5-way, d = 16, norms in [0.5, 2], separation >= 45 degrees, stddev 0.6,
/// means drawn with seed 11.
ClusterSpec reference_cluster_spec();

struct LabeledEpisode {
  Episode episode;
  std::vector<std::size_t> query_labels;  // class index of each query row
};

/// Class ids are "c0", "c1", ...; query rows are grouped by class.
LabeledEpisode sample_episode(const ClusterSpec& spec, std::size_t shot,
                              std::size_t queries_per_class, std::uint64_t seed,
                              std::uint64_t trial = 0);

/// Draws one (shot x d) support block per class from the given role's stream.
std::vector<Matrix> sample_supports(const ClusterSpec& spec, std::size_t shot, std::uint64_t seed,
                                    std::uint64_t trial, StreamRole role);

/// Draws the (n * queries_per_class x d) query block and its labels.
Matrix sample_queries(const ClusterSpec& spec, std::size_t queries_per_class, std::uint64_t seed,
                      std::uint64_t trial, std::vector<std::size_t>* labels = nullptr);

struct EvalSummary {
  double mean_accuracy = 0.0;  // percent
  double half_ci95 = 0.0;      // percent, 1.96 * sample std / sqrt(trials)
  std::size_t trials = 0;
};

/// Worker threads used for trial-parallel loops. 0 means hardware
/// concurrency. Results do not depend on this value.
struct Parallelism {
  unsigned threads = 1;
};

/// Parallelism from the SHOTMETRIC_THREADS environment variable (default 0).
Parallelism parallelism_from_env();

/// Percent accuracy of each trial, indexed by trial.
std::vector<double> trial_accuracies(const ClusterSpec& spec, const HeadConfig& head,
                                     std::size_t shot, std::size_t queries_per_class,
                                     std::size_t trials, std::uint64_t seed,
                                     Parallelism parallelism = {});

EvalSummary evaluate(const ClusterSpec& spec, const HeadConfig& head, std::size_t shot,
                     std::size_t queries_per_class, std::size_t trials, std::uint64_t seed,
                     Parallelism parallelism = {});

struct ConsistencyResult {
  std::size_t agreements = 0;
  std::size_t predictions = 0;

  double rate() const noexcept {
    return predictions == 0 ? 0.0
                            : static_cast<double>(agreements) / static_cast<double>(predictions);
  }
};

/// Fixes one query set per trial, classifies it against two independently
/// drawn support sets and pools the per-query agreements over all trials.
ConsistencyResult consistency(const ClusterSpec& spec, const HeadConfig& head, std::size_t shot,
                              std::size_t queries_per_class, std::size_t trials,
                              std::uint64_t seed, Parallelism parallelism = {});

double consistency_rate(const ClusterSpec& spec, const HeadConfig& head, std::size_t shot,
                        std::size_t queries_per_class, std::size_t trials, std::uint64_t seed,
                        Parallelism parallelism = {});

}  // namespace shotmetric
