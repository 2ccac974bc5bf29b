#include "shotmetric/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "shotmetric/episode_io.hpp"
#include "shotmetric/episode_synth.hpp"
#include "shotmetric/error.hpp"
#include "shotmetric/frn.hpp"
#include "shotmetric/grid_io.hpp"
#include "shotmetric/metric_heads.hpp"
#include "shotmetric/shot_sensitivity.hpp"

namespace shotmetric::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string scientific(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::string fraction_3dp(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string signed_3dp(double v) {
  char buf[32];
  if (std::abs(v) < 0.0005) v = 0.0;
  std::snprintf(buf, sizeof(buf), "%+.3f", v);
  return buf;
}

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> row_vector(const Matrix& m, Eigen::Index r) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(row_vector(m, r));
  return rows;
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << contents;
  if (!f) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
}

// --------------------------------------------------------------------------

struct ClassifyOptions {
  std::string episode;
  std::string head = "proto_euclidean";
  double sigma = 1.0;
  double lambda = 0.5;
  std::string regularizer = "frobenius";
  double eps = 1e-12;
  std::string out_path;
  bool json = false;
};

int run_classify(const ClassifyOptions& o, std::ostream& out) {
  HeadConfig config;
  config.head = *parse_head_kind(o.head);
  config.temperature = o.sigma;
  config.frn_lambda = o.lambda;
  config.frn_regularizer = *parse_regularizer(o.regularizer);
  config.zero_norm_eps = o.eps;
  config.validate();

  const Episode episode = read_episode_json(o.episode);
  const ClassLogits logits = classify(episode, config);
  const Predictions pred = predict(logits);

  ordered_json doc;
  doc["config"] = {{"subcommand", "classify"},
                   {"episode", o.episode},
                   {"head", o.head},
                   {"sigma", o.sigma},
                   {"lambda", o.lambda},
                   {"regularizer", o.regularizer},
                   {"zero_norm_eps", o.eps}};
  doc["class_ids"] = logits.class_ids;
  ordered_json queries = ordered_json::array();
  for (std::size_t q = 0; q < pred.class_index.size(); ++q) {
    const auto r = static_cast<Eigen::Index>(q);
    queries.push_back({{"index", q},
                       {"predicted", pred.class_id(logits, q)},
                       {"predicted_index", pred.class_index[q]},
                       {"probabilities", row_vector(pred.probabilities, r)},
                       {"logits", row_vector(logits.scores, r)}});
  }
  doc["queries"] = std::move(queries);
  const std::string text = doc.dump(2) + "\n";

  if (!o.out_path.empty()) write_file(o.out_path, text);
  if (o.json) {
    out << text;
    return kOk;
  }
  out << "config: classify episode=" << o.episode << " head=" << o.head
      << " sigma=" << format_double(o.sigma) << " lambda=" << format_double(o.lambda)
      << " regularizer=" << o.regularizer << " zero_norm_eps=" << format_double(o.eps)
      << " out=" << (o.out_path.empty() ? "-" : o.out_path) << '\n';
  out << "query\tpredicted\tprobability\n";
  for (std::size_t q = 0; q < pred.class_index.size(); ++q) {
    out << q << '\t' << pred.class_id(logits, q) << '\t'
        << fraction_3dp(pred.probabilities(static_cast<Eigen::Index>(q),
                                           static_cast<Eigen::Index>(pred.class_index[q])))
        << '\n';
  }
  return kOk;
}

// --------------------------------------------------------------------------

struct SensitivityOptions {
  std::vector<std::string> grids;
  std::vector<std::string> pair;
  std::string out_dir;
  bool json = false;
};

std::string join_2dp(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_2dp(v(i));
  }
  return s;
}

int run_sensitivity(const SensitivityOptions& o, std::ostream& out) {
  std::vector<std::string> files = o.grids;
  for (const auto& p : o.pair) {
    if (std::find(files.begin(), files.end(), p) == files.end()) files.push_back(p);
  }
  if (files.empty()) throw CLI::ValidationError("sensitivity", "no grid files given");

  ordered_json doc;
  doc["config"] = {{"subcommand", "sensitivity"},
                   {"grids", o.grids},
                   {"pair", o.pair},
                   {"out", o.out_dir.empty() ? "-" : o.out_dir}};
  doc["reports"] = ordered_json::array();

  std::ostringstream text;
  text << "config: sensitivity grids=[";
  for (std::size_t i = 0; i < o.grids.size(); ++i) text << (i ? "," : "") << o.grids[i];
  text << "] pair=[";
  for (std::size_t i = 0; i < o.pair.size(); ++i) text << (i ? "," : "") << o.pair[i];
  text << "] out=" << (o.out_dir.empty() ? "-" : o.out_dir) << '\n';

  for (const auto& file : files) {
    const AccuracyGrid grid = read_grid_csv(file);
    const SensitivityReport report = decompose(grid);
    text << file << ": score = " << format_2dp(report.score) << '\n'
         << "  row_means: " << join_2dp(report.row_means) << '\n'
         << "  model_bias: " << join_2dp(report.model_bias) << '\n';
    ordered_json entry = {{"file", file},
                          {"label", grid.label()},
                          {"score", report.score},
                          {"row_means", to_vector(report.row_means)},
                          {"model_bias", to_vector(report.model_bias)},
                          {"heatmap", matrix_json(report.heatmap)}};
    if (!o.out_dir.empty()) {
      std::ostringstream csv;
      write_report_csv(csv, grid, report);
      const fs::path target = fs::path(o.out_dir) / (fs::path(file).stem().string() + ".report.csv");
      write_file(target, csv.str());
      entry["report_csv"] = target.string();
    }
    doc["reports"].push_back(std::move(entry));
  }

  if (o.pair.size() == 2) {
    const GainTable gains = gain_table(read_grid_csv(o.pair[0]), read_grid_csv(o.pair[1]));
    text << "gain (" << o.pair[1] << " - " << o.pair[0] << ")\n"
         << "test_shot\teuclidean\tcosine\tgain\n";
    for (std::size_t i = 0; i < gains.test_shots.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double g = std::abs(gains.gains(k)) < 0.005 ? 0.0 : gains.gains(k);
      text << gains.test_shots[i] << '\t' << format_2dp(gains.euclidean_means(k)) << '\t'
           << format_2dp(gains.cosine_means(k)) << '\t' << (g >= 0.0 ? "+" : "")
           << format_2dp(g) << '\n';
    }
    doc["gain"] = {{"test_shots", gains.test_shots},
                   {"euclidean_means", to_vector(gains.euclidean_means)},
                   {"cosine_means", to_vector(gains.cosine_means)},
                   {"gains", to_vector(gains.gains)}};
    if (!o.out_dir.empty()) {
      std::ostringstream csv;
      write_gain_csv(csv, gains);
      const fs::path target = fs::path(o.out_dir) / (fs::path(o.pair[0]).stem().string() + "_vs_" +
                                                     fs::path(o.pair[1]).stem().string() +
                                                     ".gain.csv");
      write_file(target, csv.str());
      doc["gain"]["gain_csv"] = target.string();
    }
  }

  out << (o.json ? doc.dump(2) + "\n" : text.str());
  return kOk;
}

// --------------------------------------------------------------------------

struct VerifyOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 7;
  bool json = false;
};

ordered_json property_json(const PropertyResult& p) {
  return {{"name", p.name},
          {"passed", p.passed},
          {"worst_deviation", p.worst_deviation},
          {"trials", p.trials}};
}

int run_verify(const VerifyOptions& o, std::ostream& out) {
  const InvarianceReport frob = check_invariances(o.trials, o.seed, Regularizer::frobenius);
  const PropertyResult branches = check_branch_agreement(o.trials, o.seed);
  const PropertyResult expansion = check_expansion_identity(o.trials, o.seed);
  const InvarianceReport legacy = check_invariances(o.trials, o.seed, Regularizer::legacy);

  const std::vector<const PropertyResult*> gated = {&frob.shot_invariance, &frob.scale_equivariance,
                                                     &frob.dimension_equivariance, &branches,
                                                     &expansion};
  const std::vector<const PropertyResult*> informational = {
      &legacy.shot_invariance, &legacy.scale_equivariance, &legacy.dimension_equivariance};
  bool ok = true;
  for (const auto* p : gated) ok = ok && p->passed;

  if (o.json) {
    ordered_json doc;
    doc["config"] = {{"subcommand", "verify"}, {"trials", o.trials}, {"seed", o.seed}};
    doc["frobenius"] = ordered_json::array();
    for (const auto* p : gated) doc["frobenius"].push_back(property_json(*p));
    doc["legacy_informational"] = ordered_json::array();
    for (const auto* p : informational) doc["legacy_informational"].push_back(property_json(*p));
    doc["passed"] = ok;
    out << doc.dump(2) << '\n';
  } else {
    out << "config: verify trials=" << o.trials << " seed=" << o.seed << '\n';
    auto line = [&](const char* group, const PropertyResult& p) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "[%s] %-28s %s  worst=%s  trials=%zu\n", group,
                    p.name.c_str(), p.passed ? "PASS" : "FAIL",
                    scientific(p.worst_deviation).c_str(), p.trials);
      out << buf;
    };
    for (const auto* p : gated) line("frobenius", *p);
    for (const auto* p : informational) line("legacy (informational)", *p);
    out << "result: " << (ok ? "PASS" : "FAIL") << '\n';
  }
  return ok ? kOk : kNumericalFailure;
}

// --------------------------------------------------------------------------

struct ConsistencyOptions {
  std::string spec;
  std::size_t shot = 1;
  std::size_t queries = 15;
  std::size_t trials = 1000;
  std::uint64_t seed = 11;
  double sigma = 1.0;
  bool json = false;
};

int run_consistency(const ConsistencyOptions& o, std::ostream& out) {
  const ClusterSpec spec = read_cluster_spec_json(o.spec);
  const Parallelism par = parallelism_from_env();
  HeadConfig euclid;
  euclid.head = HeadKind::proto_euclidean;
  euclid.temperature = o.sigma;
  HeadConfig cosine = euclid;
  cosine.head = HeadKind::proto_cosine;

  const ConsistencyResult e = consistency(spec, euclid, o.shot, o.queries, o.trials, o.seed, par);
  const ConsistencyResult c = consistency(spec, cosine, o.shot, o.queries, o.trials, o.seed, par);

  if (o.json) {
    ordered_json doc;
    doc["config"] = {{"subcommand", "consistency"}, {"spec", o.spec},   {"shot", o.shot},
                     {"queries", o.queries},        {"trials", o.trials}, {"seed", o.seed},
                     {"sigma", o.sigma}};
    doc["proto_euclidean"] = {{"agreement", e.rate()},
                              {"agreements", e.agreements},
                              {"predictions", e.predictions}};
    doc["proto_cosine"] = {{"agreement", c.rate()},
                           {"agreements", c.agreements},
                           {"predictions", c.predictions}};
    doc["difference"] = c.rate() - e.rate();
    out << doc.dump(2) << '\n';
    return kOk;
  }
  out << "config: consistency spec=" << o.spec << " shot=" << o.shot << " queries=" << o.queries
      << " trials=" << o.trials << " seed=" << o.seed << " sigma=" << format_double(o.sigma)
      << " way=" << spec.way() << " dim=" << spec.dim()
      << " stddev=" << format_double(spec.stddev()) << '\n';
  out << "head\tagreement\n"
      << "proto_euclidean\t" << fraction_3dp(e.rate()) << '\n'
      << "proto_cosine\t" << fraction_3dp(c.rate()) << '\n'
      << "difference (cosine - euclidean)\t" << signed_3dp(c.rate() - e.rate()) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metric few-shot heads and shot-sensitivity analysis", "shotmetric"};
  app.require_subcommand(1);

  ClassifyOptions classify_opts;
  auto* classify_cmd = app.add_subcommand("classify", "Classify the queries of an episode");
  classify_cmd->add_option("episode", classify_opts.episode, "Episode JSON file")
      ->required();
  classify_cmd->add_option("--head", classify_opts.head, "Classifier head")
      ->check(CLI::IsMember({"proto_euclidean", "proto_cosine", "frn_full", "frn_simplified",
                             "frn_cosine"}))
      ->capture_default_str();
  classify_cmd->add_option("--sigma", classify_opts.sigma, "Temperature")->capture_default_str();
  classify_cmd->add_option("--lambda", classify_opts.lambda, "FRN ridge weight")
      ->capture_default_str();
  classify_cmd->add_option("--regularizer", classify_opts.regularizer, "FRN ridge form")
      ->check(CLI::IsMember({"frobenius", "legacy"}))
      ->capture_default_str();
  classify_cmd->add_option("--eps", classify_opts.eps, "Cosine zero-norm threshold")
      ->capture_default_str();
  classify_cmd->add_option("--out", classify_opts.out_path, "Write predictions JSON here");
  classify_cmd->add_flag("--json", classify_opts.json, "Print predictions JSON to stdout");

  SensitivityOptions sens_opts;
  auto* sens_cmd = app.add_subcommand("sensitivity", "Decompose accuracy grids");
  sens_cmd->add_option("grids", sens_opts.grids, "Accuracy grid CSV files");
  sens_cmd->add_option("--pair", sens_opts.pair, "Euclidean and cosine grids for a gain table")
      ->expected(2);
  sens_cmd->add_option("--out", sens_opts.out_dir, "Directory for report CSVs");
  sens_cmd->add_flag("--json", sens_opts.json, "Machine-readable output");

  VerifyOptions verify_opts;
  auto* verify_cmd = app.add_subcommand("verify", "Run the reconstruction property suite");
  verify_cmd->add_option("--trials", verify_opts.trials, "Random instances per property")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify_cmd->add_option("--seed", verify_opts.seed, "RNG seed")->capture_default_str();
  verify_cmd->add_flag("--json", verify_opts.json, "Machine-readable output");

  ConsistencyOptions cons_opts;
  auto* cons_cmd = app.add_subcommand("consistency", "Support-resampling prediction agreement");
  cons_cmd->add_option("spec", cons_opts.spec, "Cluster spec JSON file")
      ->required();
  cons_cmd->add_option("--shot", cons_opts.shot, "Support shot")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cons_cmd->add_option("--queries", cons_opts.queries, "Queries per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cons_cmd->add_option("--trials", cons_opts.trials, "Trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cons_cmd->add_option("--seed", cons_opts.seed, "RNG seed")->capture_default_str();
  cons_cmd->add_option("--sigma", cons_opts.sigma, "Temperature")->capture_default_str();
  cons_cmd->add_flag("--json", cons_opts.json, "Machine-readable output");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*classify_cmd) return run_classify(classify_opts, out);
    if (*sens_cmd) return run_sensitivity(sens_opts, out);
    if (*verify_cmd) return run_verify(verify_opts, out);
    if (*cons_cmd) return run_consistency(cons_opts, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_data_error(e.kind()) ? kDataError : kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace shotmetric::cli
