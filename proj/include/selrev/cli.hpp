#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "selrev/conformal.hpp"
#include "selrev/corpus.hpp"
#include "selrev/errors.hpp"
#include "selrev/metrics.hpp"
#include "selrev/report.hpp"
#include "selrev/scorers.hpp"
#include "selrev/synthetic.hpp"
#include "selrev/tuning.hpp"

namespace selrev {

// Exit codes: 0 ok, 1 validation error, 2 data error, 3 internal error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

struct ExperimentConfig {
  std::string questions_path;
  std::string reviews_path;
  std::string judgments_path;
  std::optional<std::string> scores_path;
  std::optional<std::string> score_kind;
  std::vector<double> thresholds = {2.00, 2.25, 2.50, 2.75};
  std::vector<std::string> methods = {"vanilla", "thrs", "imcp"};
  int depth = kDefaultDepth;
  double epsilon_step = 0.01;
  std::uint64_t seed = 0;
  bool full_precision = false;

  /// Collects every problem before failing so one run reports them all.
  void validate() const {
    std::vector<std::string> problems;
    if (questions_path.empty()) problems.push_back("--questions is required");
    if (reviews_path.empty()) problems.push_back("--reviews is required");
    if (judgments_path.empty()) problems.push_back("--judgments is required");
    for (double tau : thresholds) {
      if (!(tau >= 0.0 && tau <= kMaxRelevance)) {
        problems.push_back("threshold " + std::to_string(tau) +
                           " outside [0,3]");
      }
    }
    if (methods.empty()) problems.push_back("methods list is empty");
    for (const auto& m : methods) {
      if (m != "vanilla" && m != "thrs" && m != "imcp") {
        problems.push_back("unknown method '" + m + "'");
      }
    }
    if (depth <= 0) problems.push_back("depth must be positive");
    if (!(epsilon_step > 0.0 && epsilon_step <= 1.0)) {
      problems.push_back("epsilon step must lie in (0,1]");
    }
    if (score_kind && *score_kind != "probability" && *score_kind != "raw") {
      problems.push_back("score kind must be 'probability' or 'raw'");
    }
    if (score_kind && !scores_path) {
      problems.push_back("--score-kind given without --scores");
    }
    if (!problems.empty()) {
      std::string joined = "invalid configuration:";
      for (const auto& p : problems) joined += "\n  - " + p;
      throw ValidationError(joined);
    }
  }
};

namespace detail {

inline std::string scorer_display_name(const ExperimentConfig& config) {
  if (!config.scores_path) return "lexical";
  return std::filesystem::path(*config.scores_path).stem().string();
}

inline void check_report_rows(const std::vector<ReportRow>& rows) {
  for (const auto& row : rows) {
    if (std::abs(row.n_au - std::sqrt(row.n_a * row.n_u)) > 1e-9) {
      throw InternalError("report row violates n_au = sqrt(n_a * n_u)");
    }
  }
}

}  // namespace detail

/// Runs the (threshold x method) grid and returns one report row each.
inline std::vector<ReportRow> cmd_evaluate(const ExperimentConfig& config) {
  config.validate();
  const Corpus corpus = load_corpus(config.questions_path, config.reviews_path,
                                    config.judgments_path);

  ScoredBase base;
  if (config.scores_path) {
    std::optional<ScoreKind> kind;
    if (config.score_kind) kind = parse_score_kind(*config.score_kind);
    const ScoreTable table = load_external_scores(*config.scores_path, kind);
    base = build_scored_base(corpus, table, config.depth);
  } else {
    const Bm25Scorer scorer(CollectionStats::build(corpus.reviews()));
    base = build_scored_base(corpus, scorer, config.depth);
  }

  LooOptions options;
  options.epsilon_grid = EpsilonGrid::with_step(config.epsilon_step);
  const std::string scorer_name = detail::scorer_display_name(config);

  std::vector<ReportRow> rows;
  for (double tau : config.thresholds) {
    const ThresholdedCorpus thresholded = apply_relevance_threshold(corpus, tau);
    const QuestionSet questions = attach_relevance(corpus, base, thresholded);
    for (const auto& method : config.methods) {
      const LooResult result =
          loo_experiment(questions, parse_method(method), options);
      rows.push_back({tau, scorer_name, method, result.aggregate.n_au,
                      result.aggregate.n_a, result.aggregate.n_u});
    }
  }
  detail::check_report_rows(rows);
  return rows;
}

/// Answerability statistics at each threshold.
inline std::vector<StatsRow> cmd_stats(const std::string& questions_path,
                                       const std::string& reviews_path,
                                       const std::string& judgments_path,
                                       const std::vector<double>& thresholds) {
  const Corpus corpus = load_corpus(questions_path, reviews_path, judgments_path);
  std::vector<StatsRow> rows;
  rows.reserve(thresholds.size());
  for (double tau : thresholds) {
    rows.push_back(corpus_stats(apply_relevance_threshold(corpus, tau)));
  }
  return rows;
}

/// Writes questions/reviews/judgments/scores files for a seeded synthetic
/// corpus into `out_dir`.
inline void cmd_synth(const SyntheticConfig& config, std::uint64_t seed,
                      const std::string& out_dir) {
  const SyntheticCorpus corpus = generate_synthetic_corpus(config, seed);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const auto open = [&](const char* name) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out) throw DataError(std::string("cannot write ") + out_dir + "/" + name);
    return out;
  };

  {
    auto out = open("questions.jsonl");
    for (const auto& q : corpus.questions) {
      nlohmann::json rec{{"question_id", q.question_id},
                         {"product_id", q.product_id},
                         {"text", q.text}};
      out << rec.dump() << '\n';
    }
  }
  {
    auto out = open("reviews.jsonl");
    for (const auto& r : corpus.reviews) {
      nlohmann::json rec{{"review_id", r.review_id},
                         {"product_id", r.product_id},
                         {"text", r.text}};
      out << rec.dump() << '\n';
    }
  }
  {
    auto out = open("judgments.jsonl");
    for (const auto& j : corpus.judgments) {
      nlohmann::json rec{{"question_id", j.question_id},
                         {"review_id", j.review_id},
                         {"mean_relevance", j.mean_relevance}};
      out << rec.dump() << '\n';
    }
  }
  {
    auto out = open("scores.jsonl");
    out << nlohmann::json{{"score_kind", "probability"}}.dump() << '\n';
    for (const auto& [qid, rid, score] : corpus.scores) {
      nlohmann::json rec{{"question_id", qid},
                         {"review_id", rid},
                         {"score", score}};
      out << rec.dump() << '\n';
    }
  }
}

inline std::string format_validity(const std::vector<ValidityRow>& rows) {
  std::string out = "epsilon,miscoverage,bound,result\n";
  for (const auto& row : rows) {
    out += detail::format_double(row.epsilon, "%.4f");
    out += ',';
    out += detail::format_double(row.miscoverage, "%.6f");
    out += ',';
    out += detail::format_double(row.bound, "%.6f");
    out += ',';
    out += row.pass ? "PASS" : "FAIL";
    out += '\n';
  }
  return out;
}

namespace detail {

inline void write_text(const std::string& text,
                       const std::optional<std::string>& out_path,
                       std::ostream& fallback) {
  if (!out_path) {
    fallback << text;
    return;
  }
  std::ofstream out(*out_path, std::ios::binary);
  if (!out) throw DataError("cannot write " + *out_path);
  out << text;
}

}  // namespace detail

/// Full command-line front end; `args` excludes the program name. Kept out of
/// main() so tests can drive the exact production path in-process.
inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"selective review retrieval with a conformal rejection layer"};
  app.require_subcommand(1);

  // stats
  auto* stats = app.add_subcommand("stats", "answerability statistics per threshold");
  std::string questions_path, reviews_path, judgments_path;
  std::vector<double> thresholds = {2.00, 2.25, 2.50, 2.75};
  std::optional<std::string> out_path;
  stats->add_option("--questions", questions_path)->required();
  stats->add_option("--reviews", reviews_path)->required();
  stats->add_option("--judgments", judgments_path)->required();
  stats->add_option("--thresholds", thresholds)->delimiter(',');
  stats->add_option("--out", out_path);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "run the rejection experiments");
  ExperimentConfig config;
  std::string scores_path, score_kind;
  evaluate->add_option("--questions", config.questions_path);
  evaluate->add_option("--reviews", config.reviews_path);
  evaluate->add_option("--judgments", config.judgments_path);
  evaluate->add_option("--scores", scores_path);
  evaluate->add_option("--score-kind", score_kind);
  evaluate->add_option("--thresholds", config.thresholds)->delimiter(',');
  evaluate->add_option("--methods", config.methods)->delimiter(',');
  evaluate->add_option("--depth", config.depth);
  evaluate->add_option("--epsilon-step", config.epsilon_step);
  evaluate->add_option("--seed", config.seed);
  evaluate->add_flag("--full-precision", config.full_precision);
  evaluate->add_option("--out", out_path);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic corpus");
  SyntheticConfig synth_config;
  std::uint64_t seed = 0;
  std::string out_dir;
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--seed", seed);
  synth->add_option("--num-questions", synth_config.num_questions);
  synth->add_option("--reviews-per-question", synth_config.reviews_per_question);
  synth->add_option("--positive-rate", synth_config.positive_rate);
  synth->add_option("--unanswerable-fraction", synth_config.unanswerable_fraction);
  synth->add_option("--pos-a", synth_config.relevant_dist.a);
  synth->add_option("--pos-b", synth_config.relevant_dist.b);
  synth->add_option("--neg-a", synth_config.irrelevant_dist.a);
  synth->add_option("--neg-b", synth_config.irrelevant_dist.b);

  // validate-conformal
  auto* validate = app.add_subcommand(
      "validate-conformal", "Monte Carlo check of the coverage guarantee");
  ValidityConfig validity_config;
  std::vector<double> epsilons = {0.05, 0.1, 0.2, 0.3};
  validate->add_option("--seed", seed);
  validate->add_option("--n", validity_config.test_points);
  validate->add_option("--calibration", validity_config.calibration_points);
  validate->add_option("--epsilons", epsilons)->delimiter(',');
  validate->add_option("--positive-rate", validity_config.positive_rate);
  validate->add_option("--pos-a", validity_config.relevant_dist.a);
  validate->add_option("--pos-b", validity_config.relevant_dist.b);
  validate->add_option("--neg-a", validity_config.irrelevant_dist.a);
  validate->add_option("--neg-b", validity_config.irrelevant_dist.b);
  validate->add_option("--shift", validity_config.shift);
  validate->add_option("--out", out_path);

  try {
    std::vector<const char*> argv;
    argv.push_back("selrev");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (stats->parsed()) {
      for (double tau : thresholds) {
        if (!(tau >= 0.0 && tau <= kMaxRelevance)) {
          throw ValidationError("threshold " + std::to_string(tau) +
                                " outside [0,3]");
        }
      }
      detail::write_text(
          format_stats(cmd_stats(questions_path, reviews_path, judgments_path,
                                 thresholds)),
          out_path, out);
    } else if (evaluate->parsed()) {
      if (!scores_path.empty()) config.scores_path = scores_path;
      if (!score_kind.empty()) config.score_kind = score_kind;
      detail::write_text(
          format_report(cmd_evaluate(config), config.full_precision), out_path,
          out);
    } else if (synth->parsed()) {
      cmd_synth(synth_config, seed, out_dir);
    } else if (validate->parsed()) {
      detail::write_text(
          format_validity(validate_conformal(validity_config, seed, epsilons)),
          out_path, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace selrev
