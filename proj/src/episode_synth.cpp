#include "shotmetric/episode_synth.hpp"

#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <string>
#include <thread>

#include "shotmetric/error.hpp"
#include "shotmetric/random.hpp"

namespace shotmetric {

ClusterSpec::ClusterSpec(Matrix means, double stddev) : means_(std::move(means)), stddev_(stddev) {
  if (means_.rows() < 2) throw Error(ErrorKind::InvalidInput, "cluster spec needs way >= 2");
  if (means_.cols() < 1) throw Error(ErrorKind::InvalidInput, "cluster spec needs dim >= 1");
  if (!means_.allFinite()) throw Error(ErrorKind::InvalidInput, "class means must be finite");
  if (!(stddev_ > 0.0) || !std::isfinite(stddev_)) {
    throw Error(ErrorKind::InvalidInput, "stddev must be positive and finite");
  }
}

ClusterSpec generate_cluster_spec(const ClusterGenerator& gen) {
  if (gen.way < 2 || gen.dim < 1) {
    throw Error(ErrorKind::InvalidInput, "generated spec needs way >= 2 and dim >= 1");
  }
  if (!(gen.norm_lo > 0.0) || !(gen.norm_hi >= gen.norm_lo)) {
    throw Error(ErrorKind::InvalidInput, "mean_norm_range must satisfy 0 < lo <= hi");
  }
  if (!(gen.min_angle_deg >= 0.0) || gen.min_angle_deg > 180.0) {
    throw Error(ErrorKind::InvalidInput, "min_angle_deg must lie in [0, 180]");
  }
  constexpr std::uint32_t kMeansRole = 0x4d45414e;  // "MEAN"
  constexpr int kMaxAttempts = 100000;
  StreamRng rng(gen.seed, 0, kMeansRole);
  const double max_cos = std::cos(gen.min_angle_deg * std::numbers::pi / 180.0);
  const auto n = static_cast<Eigen::Index>(gen.way);
  const auto d = static_cast<Eigen::Index>(gen.dim);

  Matrix directions(n, d);
  for (Eigen::Index c = 0; c < n; ++c) {
    int attempt = 0;
    while (true) {
      if (++attempt > kMaxAttempts) {
        throw Error(ErrorKind::InvalidInput, "cannot place " + std::to_string(gen.way) +
                                                 " directions in dimension " +
                                                 std::to_string(gen.dim) + " with the requested "
                                                 "angular separation");
      }
      Vector v = rng.normal_matrix(1, d).row(0).transpose();
      const double norm = v.norm();
      if (norm == 0.0) continue;
      v /= norm;
      bool separated = true;
      for (Eigen::Index prev = 0; prev < c && separated; ++prev) {
        separated = directions.row(prev).dot(v) <= max_cos;
      }
      if (separated) {
        directions.row(c) = v.transpose();
        break;
      }
    }
  }
  Matrix means(n, d);
  for (Eigen::Index c = 0; c < n; ++c) {
    means.row(c) = rng.uniform(gen.norm_lo, gen.norm_hi) * directions.row(c);
  }
  return ClusterSpec(std::move(means), gen.stddev);
}

ClusterSpec reference_cluster_spec() { return generate_cluster_spec(ClusterGenerator{}); }

std::vector<Matrix> sample_supports(const ClusterSpec& spec, std::size_t shot, std::uint64_t seed,
                                    std::uint64_t trial, StreamRole role) {
  if (shot < 1) throw Error(ErrorKind::InvalidInput, "shot must be >= 1");
  StreamRng rng(seed, trial, static_cast<std::uint32_t>(role));
  const auto k = static_cast<Eigen::Index>(shot);
  std::vector<Matrix> support;
  support.reserve(spec.way());
  for (Eigen::Index c = 0; c < spec.means().rows(); ++c) {
    Matrix block = spec.stddev() * rng.normal_matrix(k, spec.means().cols());
    block.rowwise() += spec.means().row(c);
    support.push_back(std::move(block));
  }
  return support;
}

Matrix sample_queries(const ClusterSpec& spec, std::size_t queries_per_class, std::uint64_t seed,
                      std::uint64_t trial, std::vector<std::size_t>* labels) {
  if (queries_per_class < 1) throw Error(ErrorKind::InvalidInput, "queries_per_class must be >= 1");
  StreamRng rng(seed, trial, static_cast<std::uint32_t>(StreamRole::query));
  const auto q = static_cast<Eigen::Index>(queries_per_class);
  const Eigen::Index n = spec.means().rows();
  Matrix queries(n * q, spec.means().cols());
  if (labels) labels->clear();
  for (Eigen::Index c = 0; c < n; ++c) {
    Matrix block = spec.stddev() * rng.normal_matrix(q, spec.means().cols());
    block.rowwise() += spec.means().row(c);
    queries.middleRows(c * q, q) = block;
    if (labels) labels->insert(labels->end(), queries_per_class, static_cast<std::size_t>(c));
  }
  return queries;
}

namespace {

std::vector<std::string> class_ids_for(std::size_t way) {
  std::vector<std::string> ids;
  ids.reserve(way);
  for (std::size_t c = 0; c < way; ++c) ids.push_back("c" + std::to_string(c));
  return ids;
}

unsigned resolve_threads(Parallelism p, std::size_t work) {
  unsigned threads = p.threads == 0 ? std::thread::hardware_concurrency() : p.threads;
  if (threads == 0) threads = 1;
  if (work < threads) threads = static_cast<unsigned>(std::max<std::size_t>(work, 1));
  return threads;
}

// Runs body(t) for every trial. Each trial writes only its own slot, so the
// thread count cannot change results. The exception from the lowest failing
// trial index is rethrown.
template <typename Body>
void for_each_trial(std::size_t trials, Parallelism parallelism, Body&& body) {
  const unsigned threads = resolve_threads(parallelism, trials);
  std::vector<std::exception_ptr> errors(trials);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      try {
        body(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    run_range(0, trials);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (trials + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(trials, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_range, begin, end);
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_counts(std::size_t shot, std::size_t queries_per_class, std::size_t trials) {
  if (shot < 1) throw Error(ErrorKind::InvalidInput, "shot must be >= 1");
  if (queries_per_class < 1) throw Error(ErrorKind::InvalidInput, "queries_per_class must be >= 1");
  if (trials < 1) throw Error(ErrorKind::InvalidInput, "trials must be >= 1");
}

}  // namespace

LabeledEpisode sample_episode(const ClusterSpec& spec, std::size_t shot,
                              std::size_t queries_per_class, std::uint64_t seed,
                              std::uint64_t trial) {
  std::vector<std::size_t> labels;
  Matrix queries = sample_queries(spec, queries_per_class, seed, trial, &labels);
  return {Episode(class_ids_for(spec.way()),
                  sample_supports(spec, shot, seed, trial, StreamRole::support),
                  std::move(queries)),
          std::move(labels)};
}

Parallelism parallelism_from_env() {
  Parallelism p{0};
  if (const char* env = std::getenv("SHOTMETRIC_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0') p.threads = static_cast<unsigned>(v);
  }
  return p;
}

std::vector<double> trial_accuracies(const ClusterSpec& spec, const HeadConfig& head,
                                     std::size_t shot, std::size_t queries_per_class,
                                     std::size_t trials, std::uint64_t seed,
                                     Parallelism parallelism) {
  check_counts(shot, queries_per_class, trials);
  head.validate();
  std::vector<double> acc(trials, 0.0);
  for_each_trial(trials, parallelism, [&](std::size_t t) {
    const LabeledEpisode ep = sample_episode(spec, shot, queries_per_class, seed, t);
    const Predictions pred = predict(classify(ep.episode, head));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ep.query_labels.size(); ++i) {
      if (pred.class_index[i] == ep.query_labels[i]) ++correct;
    }
    acc[t] = 100.0 * static_cast<double>(correct) / static_cast<double>(ep.query_labels.size());
  });
  return acc;
}

EvalSummary evaluate(const ClusterSpec& spec, const HeadConfig& head, std::size_t shot,
                     std::size_t queries_per_class, std::size_t trials, std::uint64_t seed,
                     Parallelism parallelism) {
  const std::vector<double> acc =
      trial_accuracies(spec, head, shot, queries_per_class, trials, seed, parallelism);
  EvalSummary s;
  s.trials = trials;
  double sum = 0.0;
  for (double a : acc) sum += a;
  s.mean_accuracy = sum / static_cast<double>(trials);
  if (trials > 1) {
    double sq = 0.0;
    for (double a : acc) sq += (a - s.mean_accuracy) * (a - s.mean_accuracy);
    const double sample_std = std::sqrt(sq / static_cast<double>(trials - 1));
    s.half_ci95 = 1.96 * sample_std / std::sqrt(static_cast<double>(trials));
  }
  return s;
}

ConsistencyResult consistency(const ClusterSpec& spec, const HeadConfig& head, std::size_t shot,
                              std::size_t queries_per_class, std::size_t trials,
                              std::uint64_t seed, Parallelism parallelism) {
  check_counts(shot, queries_per_class, trials);
  head.validate();
  const auto ids = class_ids_for(spec.way());
  std::vector<std::size_t> agree(trials, 0);
  for_each_trial(trials, parallelism, [&](std::size_t t) {
    const Matrix queries = sample_queries(spec, queries_per_class, seed, t);
    const Episode first(ids, sample_supports(spec, shot, seed, t, StreamRole::support), queries);
    const Episode second(ids, sample_supports(spec, shot, seed, t, StreamRole::support_resample),
                         queries);
    const Predictions a = predict(classify(first, head));
    const Predictions b = predict(classify(second, head));
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.class_index.size(); ++i) {
      if (a.class_index[i] == b.class_index[i]) ++same;
    }
    agree[t] = same;
  });
  ConsistencyResult r;
  for (std::size_t a : agree) r.agreements += a;
  r.predictions = trials * spec.way() * queries_per_class;
  return r;
}

double consistency_rate(const ClusterSpec& spec, const HeadConfig& head, std::size_t shot,
                        std::size_t queries_per_class, std::size_t trials, std::uint64_t seed,
                        Parallelism parallelism) {
  return consistency(spec, head, shot, queries_per_class, trials, seed, parallelism).rate();
}

}  // namespace shotmetric
