// One line per acceptance criterion; exits non-zero if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "shotmetric/cli.hpp"
#include "shotmetric/episode_synth.hpp"
#include "shotmetric/frn.hpp"
#include "shotmetric/grid_io.hpp"
#include "shotmetric/metric_heads.hpp"
#include "shotmetric/shot_sensitivity.hpp"

using namespace shotmetric;

namespace {

constexpr double kGoldenTol = 0.03;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

AccuracyGrid grid(const std::string& name) {
  return read_grid_csv(std::string(SHOTMETRIC_DATA_DIR) + "/grids/" + name + ".csv");
}

Outcome golden_sensitivity() {
  Outcome o;
  const SensitivityReport proto = decompose(grid("meta_inat_conv_4__proto"));
  o.require(std::abs(proto.score - 14.86) <= kGoldenTol, "iNat Proto score " + fmt("%.4f", proto.score));
  const double bias[] = {0.47, 1.99, 0.16, -2.61};
  for (int j = 0; j < 4; ++j) {
    o.require(std::abs(proto.model_bias(j) - bias[j]) <= kGoldenTol,
              "model_bias[" + std::to_string(j) + "] " + fmt("%.4f", proto.model_bias(j)));
  }
  const double rows[] = {49.04, 63.95, 74.17, 79.86, 82.76, 84.30};
  for (int i = 0; i < 6; ++i) {
    o.require(std::abs(proto.row_means(i) - rows[i]) <= kGoldenTol,
              "row_means[" + std::to_string(i) + "] " + fmt("%.4f", proto.row_means(i)));
  }
  const std::pair<const char*, double> scores[] = {
      {"meta_inat_conv_4__cosine_proto", 2.13},
      {"cub_conv_4__frn", 6.71},
      {"cub_conv_4__cosine_frn", 1.29},
      {"min_resnet_12__cosine_feat", 0.19},
  };
  for (const auto& [name, expected] : scores) {
    const double s = sensitivity_score(grid(name));
    o.require(std::abs(s - expected) <= kGoldenTol, std::string(name) + " " + fmt("%.4f", s));
  }

  // Cross-check against the summary table of scores for every model/dataset.
  const char* datasets[] = {"cub_conv_4",    "min_conv_4",    "meta_inat_conv_4",
                            "cub_resnet_12", "min_resnet_12", "tin_resnet_12"};
  const std::pair<const char*, std::array<double, 6>> table[] = {
      {"proto", {9.33, 7.32, 14.86, 1.14, 1.21, 1.01}},
      {"pca", {4.46, 3.76, 2.26, 0.89, 1.43, 0.80}},
      {"est", {4.07, 3.11, 3.95, 0.84, 1.24, 0.98}},
      {"cosine_proto", {1.60, 1.39, 2.13, 0.78, 1.09, 0.46}},
      {"feat", {2.70, 3.77, 4.16, 6.10, 2.13, 0.63}},
      {"cosine_feat", {0.72, 1.31, 2.43, 1.27, 0.19, 0.63}},
      {"frn", {6.71, 5.09, 5.46, 2.80, 1.35, 1.07}},
      {"cosine_frn", {1.29, 1.14, 2.12, 0.21, 0.30, 0.39}},
  };
  int agree = 0, total = 0;
  std::string mismatches;
  for (const auto& [model, values] : table) {
    for (int d = 0; d < 6; ++d) {
      const std::string name = std::string(datasets[d]) + "__" + model;
      const double s = sensitivity_score(grid(name));
      ++total;
      if (std::abs(s - values[std::size_t(d)]) <= kGoldenTol) {
        ++agree;
      } else {
        mismatches += " " + name + "=" + fmt("%.2f", s) + "(table " +
                      fmt("%.2f", values[std::size_t(d)]) + ")";
      }
    }
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(agree) + "/" +
              std::to_string(total) + " summary-table scores agree";
  if (!mismatches.empty()) o.detail += ", off-table:" + mismatches;
  return o;
}

Outcome gain_reproduction() {
  Outcome o;
  const GainTable t = gain_table(grid("meta_inat_conv_4__proto"), grid("meta_inat_conv_4__cosine_proto"));
  const double expected[] = {13.33, 6.65, 2.48, 0.67, -0.07, -0.39};
  double worst = 0.0;
  for (int i = 0; i < 6; ++i) worst = std::max(worst, std::abs(t.gains(i) - expected[i]));
  o.require(worst <= kGoldenTol, "worst gain deviation " + fmt("%.4f", worst));
  if (o.pass) {
    o.detail = "gain@1=" + fmt("%+.2f", t.gains(0)) + " gain@32=" + fmt("%+.2f", t.gains(5)) +
               " worst dev " + fmt("%.4f", worst);
  }
  return o;
}

Outcome from_property(const PropertyResult& p, double budget_s, double elapsed_s) {
  Outcome o;
  o.require(p.passed, "worst " + fmt("%.3e", p.worst_deviation));
  o.require(p.trials >= 1000, "only " + std::to_string(p.trials) + " trials");
  o.require(elapsed_s < budget_s, "took " + fmt("%.2f", elapsed_s) + " s");
  if (o.pass) {
    o.detail = std::to_string(p.trials) + " instances, worst " + fmt("%.3e", p.worst_deviation) +
               ", " + fmt("%.2f", elapsed_s) + " s";
  }
  return o;
}

Outcome invariances(double elapsed_s, const InvarianceReport& frob, const InvarianceReport& legacy) {
  Outcome o;
  for (const PropertyResult* p :
       {&frob.shot_invariance, &frob.scale_equivariance, &frob.dimension_equivariance}) {
    o.require(p->passed && p->trials >= 100, p->name + " worst " + fmt("%.3e", p->worst_deviation));
  }
  o.require(!legacy.scale_equivariance.passed, "legacy scale equivariance did not fail");
  o.require(elapsed_s < 5.0, "took " + fmt("%.2f", elapsed_s) + " s");
  if (o.pass) {
    o.detail = "frobenius worst " +
               fmt("%.1e", std::max({frob.shot_invariance.worst_deviation,
                                     frob.scale_equivariance.worst_deviation,
                                     frob.dimension_equivariance.worst_deviation})) +
               "; legacy scale worst " + fmt("%.2e", legacy.scale_equivariance.worst_deviation);
  }
  return o;
}

Outcome head_contracts() {
  Outcome o;
  std::mt19937 eng(2024);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> small(1, 12);
  std::uniform_real_distribution<double> sig(0.1, 20.0);
  auto normal = [&](int r, int c) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = n01(eng);
    return m;
  };
  const int trials = 1000;
  int cos_bad = 0, simp_bad = 0, frncos_bad = 0, prop_bad = 0, softmax_bad = 0;
  double worst_softmax = 0.0;
  HeadConfig cfg;
  for (int t = 0; t < trials; ++t) {
    const int d = small(eng), way = small(eng) + 1, nq = small(eng);
    const double sigma = sig(eng);
    const Matrix logits = cosine_logits(normal(nq, d), normal(way, d), sigma, 1e-12);
    if ((logits.array().abs() > sigma).any()) ++cos_bad;

    // In one dimension every pair of covariances is proportional.
    const int fd = d + 1;
    const FeaturePool s(normal(small(eng), fd)), q(normal(small(eng), fd));
    if (frn_logit_simplified(s, q, cfg) < 0.0) ++simp_bad;
    const double c = frn_logit_cosine(s, q);
    if (c < 0.0 || c > 1.0) ++frncos_bad;
    if (c >= 1.0 - 1e-9) ++frncos_bad;  // random pools are not proportional

    const double alpha = sig(eng) * (t % 2 ? 1.0 : -1.0);
    if (std::abs(frn_logit_cosine(s, FeaturePool(alpha * s.features())) - 1.0) > 1e-12) ++prop_bad;

    const Matrix p = softmax_rows(sigma * normal(nq, way));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double dev = std::abs(p.row(r).sum() - 1.0);
      worst_softmax = std::max(worst_softmax, dev);
      if (dev > 1e-9) ++softmax_bad;
    }
  }
  o.require(cos_bad == 0, std::to_string(cos_bad) + " cosine logits outside +-sigma");
  o.require(simp_bad == 0, std::to_string(simp_bad) + " negative simplified logits");
  o.require(frncos_bad == 0, std::to_string(frncos_bad) + " cosine-FRN values outside [0,1) on generic pools");
  o.require(prop_bad == 0, std::to_string(prop_bad) + " proportional pools not scoring 1");
  o.require(softmax_bad == 0, "softmax row sum off by " + fmt("%.2e", worst_softmax));
  if (o.pass) {
    o.detail = std::to_string(trials) + " instances per property, softmax worst " +
               fmt("%.1e", worst_softmax);
  }
  return o;
}

Outcome decomposition_algebra() {
  Outcome o;
  std::mt19937 eng(77);
  std::uniform_int_distribution<int> size(2, 9);
  std::uniform_real_distribution<double> acc(20.0, 80.0), shift(-9.0, 9.0);
  double worst_rebuild = 0.0, worst_absorb = 0.0;
  const int grids = 200;
  for (int k = 0; k < grids; ++k) {
    const int t = size(eng), j = size(eng);
    Matrix v(t, j);
    for (int r = 0; r < t; ++r)
      for (int c = 0; c < j; ++c) v(r, c) = acc(eng);
    std::vector<int> ts(static_cast<std::size_t>(t)), js(static_cast<std::size_t>(j));
    for (int r = 0; r < t; ++r) ts[std::size_t(r)] = 1 << r;
    for (int c = 0; c < j; ++c) js[std::size_t(c)] = 4 << c;
    const SensitivityReport rep = decompose(AccuracyGrid(v, ts, js));
    Matrix rebuilt = rep.heatmap;
    rebuilt.colwise() += rep.row_means;
    rebuilt.rowwise() += rep.model_bias.transpose();
    worst_rebuild = std::max(worst_rebuild, (rebuilt - v).cwiseAbs().maxCoeff());

    Matrix shifted = v;
    for (int r = 0; r < t; ++r) shifted.row(r).array() += shift(eng);
    for (int c = 0; c < j; ++c) shifted.col(c).array() += shift(eng);
    const SensitivityReport moved = decompose(AccuracyGrid(shifted, ts, js));
    worst_absorb = std::max(worst_absorb, (moved.heatmap - rep.heatmap).cwiseAbs().maxCoeff());
  }
  o.require(worst_rebuild <= 1e-12, "reconstruction off by " + fmt("%.2e", worst_rebuild));
  o.require(worst_absorb <= 1e-9, "absorption off by " + fmt("%.2e", worst_absorb));
  if (o.pass) {
    o.detail = std::to_string(grids) + " grids, rebuild " + fmt("%.1e", worst_rebuild) +
               ", absorb " + fmt("%.1e", worst_absorb);
  }
  return o;
}

Outcome consistency_direction(double& elapsed_s) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  const ClusterSpec spec = reference_cluster_spec();
  HeadConfig euclid, cosine;
  euclid.head = HeadKind::proto_euclidean;
  cosine.head = HeadKind::proto_cosine;
  const Parallelism par = parallelism_from_env();
  const double e = consistency_rate(spec, euclid, 1, 15, 1000, 11, par);
  const double c = consistency_rate(spec, cosine, 1, 15, 1000, 11, par);
  o.require(c > e, "seed 11: cosine " + fmt("%.4f", c) + " <= euclidean " + fmt("%.4f", e));
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    if (consistency_rate(spec, cosine, 1, 15, 1000, seed, par) >
        consistency_rate(spec, euclid, 1, 15, 1000, seed, par)) {
      ++wins;
    }
  }
  o.require(wins >= 8, "cosine ahead on only " + std::to_string(wins) + "/10 seeds");
  elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(elapsed_s < 30.0, "took " + fmt("%.2f", elapsed_s) + " s");
  if (o.pass) {
    o.detail = "seed 11: cosine " + fmt("%.4f", c) + " vs euclidean " + fmt("%.4f", e) +
               "; cosine ahead on " + std::to_string(wins) + "/10 seeds";
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  const std::string data = SHOTMETRIC_DATA_DIR;
  const std::vector<std::vector<std::string>> invocations = {
      {"shotmetric", "classify", data + "/episodes/three_way_pooled.json", "--head", "frn_full"},
      {"shotmetric", "classify", data + "/episodes/two_way.json", "--head", "proto_cosine", "--json"},
      {"shotmetric", "sensitivity", data + "/grids/meta_inat_conv_4__proto.csv", "--pair",
       data + "/grids/meta_inat_conv_4__proto.csv", data + "/grids/meta_inat_conv_4__cosine_proto.csv"},
      {"shotmetric", "verify", "--trials", "25", "--seed", "5", "--json"},
      {"shotmetric", "consistency", data + "/specs/reference.json", "--trials", "200"},
  };
  for (const auto& args : invocations) {
    std::ostringstream a, b, ea, eb;
    const int ca = cli::run(args, a, ea);
    const int cb = cli::run(args, b, eb);
    o.require(ca == cb && a.str() == b.str() && !a.str().empty(), "output differs for " + args[1]);
  }
  const ClusterSpec spec = reference_cluster_spec();
  for (HeadKind h : {HeadKind::proto_euclidean, HeadKind::proto_cosine, HeadKind::frn_full,
                     HeadKind::frn_simplified, HeadKind::frn_cosine}) {
    HeadConfig cfg;
    cfg.head = h;
    const EvalSummary serial = evaluate(spec, cfg, 1, 15, 200, 3, Parallelism{1});
    const EvalSummary parallel = evaluate(spec, cfg, 1, 15, 200, 3, Parallelism{4});
    o.require(serial.mean_accuracy == parallel.mean_accuracy &&
                  serial.half_ci95 == parallel.half_ci95,
              std::string("evaluate differs for ") + std::string(to_string(h)));
  }
  if (o.pass) o.detail = std::to_string(invocations.size()) + " CLI invocations, 5 heads serial=parallel";
  return o;
}

double timed(const std::function<void()>& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s  %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    if (!o.pass) ++failures;
  };
  auto guarded = [&](int id, const char* name, const std::function<Outcome()>& f) {
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, Outcome{false, std::string("threw: ") + e.what()});
    }
  };

  guarded(1, "golden sensitivity reproduction", golden_sensitivity);
  guarded(2, "gain-table reproduction", gain_reproduction);
  guarded(3, "ridge branch agreement", [] {
    PropertyResult p;
    const double s = timed([&] { p = check_branch_agreement(2000, 3); });
    return from_property(p, 10.0, s);
  });
  guarded(4, "expansion identity", [] {
    PropertyResult p;
    const double s = timed([&] { p = check_expansion_identity(2000, 4); });
    return from_property(p, 10.0, s);
  });
  guarded(5, "frobenius invariances, legacy counterexample", [] {
    InvarianceReport frob, legacy;
    const double s = timed([&] {
      frob = check_invariances(200, 5, Regularizer::frobenius);
      legacy = check_invariances(200, 5, Regularizer::legacy);
    });
    return invariances(s, frob, legacy);
  });
  guarded(6, "head-contract properties", head_contracts);
  guarded(7, "decomposition algebra", decomposition_algebra);
  guarded(8, "consistency: cosine more stable than euclidean", [] {
    double s = 0.0;
    return consistency_direction(s);
  });
  guarded(9, "determinism", determinism);

  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
