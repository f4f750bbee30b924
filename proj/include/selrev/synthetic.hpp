#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "selrev/conformal.hpp"
#include "selrev/corpus.hpp"
#include "selrev/errors.hpp"
#include "selrev/scorers.hpp"

namespace selrev {

/// All synthetic randomness flows from one 64-bit seed through std::mt19937_64
/// (the standard fixes its output sequence, so fixtures are portable across
/// platforms). Uniform doubles are derived from the top 53 bits rather than
/// std::uniform_real_distribution, whose output is implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Kumaraswamy distribution on [0,1]: unimodal for a,b >= 1 with the
/// closed-form quantile (1 - (1-u)^(1/b))^(1/a), so sampling stays
/// bit-reproducible. Used as the per-class probability model.
struct Kumaraswamy {
  double a = 1.0;
  double b = 1.0;

  void validate() const {
    if (!(a >= 1.0) || !(b >= 1.0)) {
      throw ValidationError("distribution parameters must be >= 1");
    }
  }

  double sample(SeededRng& rng) const {
    const double u = rng.uniform();
    return std::pow(1.0 - std::pow(1.0 - u, 1.0 / b), 1.0 / a);
  }
};

struct SyntheticConfig {
  int num_questions = 40;
  int reviews_per_question = 30;
  /// Chance that a pair of an answerable question is relevant.
  double positive_rate = 0.3;
  /// Chance that a question draws every pair from the irrelevant class.
  double unanswerable_fraction = 0.4;
  /// Classifier probability of relevant pairs.
  Kumaraswamy relevant_dist{6.0, 2.0};
  /// Classifier probability of irrelevant pairs.
  Kumaraswamy irrelevant_dist{2.0, 6.0};

  void validate() const {
    if (num_questions < 0) {
      throw ValidationError("num_questions must be non-negative");
    }
    if (reviews_per_question < 0) {
      throw ValidationError("reviews_per_question must be non-negative");
    }
    if (!(positive_rate >= 0.0 && positive_rate <= 1.0)) {
      throw ValidationError("positive_rate must lie in [0,1]");
    }
    if (!(unanswerable_fraction >= 0.0 && unanswerable_fraction <= 1.0)) {
      throw ValidationError("unanswerable_fraction must lie in [0,1]");
    }
    relevant_dist.validate();
    irrelevant_dist.validate();
  }
};

struct SyntheticCorpus {
  std::vector<Question> questions;
  std::vector<ReviewSentence> reviews;
  std::vector<RelevanceJudgment> judgments;
  /// Probabilistic model scores for every generated pair.
  std::vector<std::tuple<std::string, std::string, double>> scores;
};

namespace detail {
inline std::string zero_padded(int value, int width) {
  std::string digits = std::to_string(value);
  return std::string(width > static_cast<int>(digits.size())
                         ? width - static_cast<int>(digits.size())
                         : 0,
                     '0') +
         digits;
}
}  // namespace detail

/// Generates an exchangeable labeled corpus: each question independently
/// becomes unanswerable (all pairs irrelevant) or answerable (pairs relevant
/// with `positive_rate`); each pair's model probability is drawn from its
/// class distribution. Relevant pairs are judged 3.0 and irrelevant ones 0.0,
/// so the labels are the same at every threshold in (0, 3].
inline SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config,
                                                 std::uint64_t seed) {
  config.validate();
  SeededRng rng(seed);
  SyntheticCorpus out;
  for (int q = 0; q < config.num_questions; ++q) {
    const std::string qid = "q" + detail::zero_padded(q, 4);
    const std::string pid = "p" + detail::zero_padded(q, 4);
    out.questions.push_back({qid, pid, "synthetic question " + qid, {}});
    const bool unanswerable = rng.bernoulli(config.unanswerable_fraction);
    for (int r = 0; r < config.reviews_per_question; ++r) {
      const std::string rid = qid + "-r" + detail::zero_padded(r, 4);
      out.reviews.push_back({rid, pid, "synthetic review " + rid});
      const bool relevant = !unanswerable && rng.bernoulli(config.positive_rate);
      const double probability = relevant
                                     ? config.relevant_dist.sample(rng)
                                     : config.irrelevant_dist.sample(rng);
      out.judgments.push_back({qid, rid, relevant ? 3.0 : 0.0, {}});
      out.scores.emplace_back(qid, rid, probability);
    }
  }
  return out;
}

// --- conformal validity ------------------------------------------------------

struct ValidityConfig {
  int test_points = 10000;
  int calibration_points = 4000;
  double positive_rate = 0.3;
  Kumaraswamy relevant_dist{6.0, 2.0};
  Kumaraswamy irrelevant_dist{2.0, 6.0};
  /// Subtracted from relevant-class probabilities at test time only; a
  /// non-zero shift breaks exchangeability on purpose (negative control).
  double shift = 0.0;

  void validate() const {
    if (test_points < 1000) {
      throw ValidationError("validity check needs at least 1000 test points");
    }
    if (calibration_points < 1) {
      throw ValidationError("calibration_points must be positive");
    }
    if (!(positive_rate >= 0.0 && positive_rate <= 1.0)) {
      throw ValidationError("positive_rate must lie in [0,1]");
    }
    relevant_dist.validate();
    irrelevant_dist.validate();
  }
};

struct ValidityRow {
  double epsilon = 0.0;
  double miscoverage = 0.0;  ///< empirical rate of "true label not in region"
  double bound = 0.0;        ///< epsilon + 3 * sqrt(epsilon(1-epsilon)/N)
  bool pass = false;
};

/// Monte Carlo check of the coverage guarantee: draws calibration and test
/// pairs from the same seeded distribution, computes the p-value of each test
/// point's true label, and compares the miscoverage rate at each significance
/// level against the 3-sigma binomial envelope.
inline std::vector<ValidityRow> validate_conformal(
    const ValidityConfig& config, std::uint64_t seed,
    const std::vector<double>& epsilons,
    PValueMode mode = PValueMode::mondrian) {
  config.validate();
  SeededRng rng(seed);

  const auto draw = [&](bool shifted) -> LabeledProbability {
    const bool relevant = rng.bernoulli(config.positive_rate);
    double probability = relevant ? config.relevant_dist.sample(rng)
                                  : config.irrelevant_dist.sample(rng);
    if (shifted && relevant) {
      probability = std::clamp(probability - config.shift, 0.0, 1.0);
    }
    return {probability, relevant};
  };

  std::vector<LabeledProbability> calibration_pairs;
  calibration_pairs.reserve(config.calibration_points);
  for (int i = 0; i < config.calibration_points; ++i) {
    calibration_pairs.push_back(draw(false));
  }
  const CalibrationSet calibration = calibrate(calibration_pairs);

  std::vector<double> true_label_pvalues;
  true_label_pvalues.reserve(config.test_points);
  for (int i = 0; i < config.test_points; ++i) {
    const LabeledProbability pair = draw(config.shift != 0.0);
    const Label label = pair.relevant ? Label::relevant : Label::irrelevant;
    true_label_pvalues.push_back(p_value(
        calibration, nonconformity(pair.probability, label), label, mode));
  }

  std::vector<ValidityRow> rows;
  rows.reserve(epsilons.size());
  const double n = static_cast<double>(config.test_points);
  for (double epsilon : epsilons) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw ValidationError("significance level must lie in [0,1]");
    }
    ValidityRow row;
    row.epsilon = epsilon;
    std::size_t missed = 0;
    for (double p : true_label_pvalues) {
      if (p <= epsilon) ++missed;
    }
    row.miscoverage = static_cast<double>(missed) / n;
    row.bound = epsilon + 3.0 * std::sqrt(epsilon * (1.0 - epsilon) / n);
    row.pass = row.miscoverage <= row.bound;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace selrev
