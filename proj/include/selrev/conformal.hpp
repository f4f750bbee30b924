#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "selrev/errors.hpp"
#include "selrev/scorers.hpp"

namespace selrev {

/// Binary relevance label: 1 means the review answers the question.
enum class Label : int { irrelevant = 0, relevant = 1 };

/// Nonconformity of a candidate under a hypothesised label, defined as the
/// negated probability the classifier assigns to that label:
///   alpha(x, 1) = -f(x)        alpha(x, 0) = -(1 - f(x))
/// where f is the positive-class probability. Always lies in [-1, 0]; larger
/// means the candidate conforms less to the label.
inline double nonconformity(double probability, Label label) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("probability outside [0,1]: " +
                          std::to_string(probability));
  }
  return label == Label::relevant ? -probability : -(1.0 - probability);
}

struct LabeledProbability {
  double probability = 0.0;
  bool relevant = false;
};

enum class PValueMode {
  /// Label-conditioned (Mondrian) p-values: each label is compared against
  /// calibration examples of that label only. The default; it keeps per-class
  /// validity when the classes are badly imbalanced.
  mondrian,
  /// Pooled p-values over the whole calibration set regardless of label.
  pooled,
};

/// Class-conditional multisets of calibration nonconformity scores, stored
/// sorted for binary-search counting. Immutable once built.
class CalibrationSet {
 public:
  CalibrationSet() = default;

  static CalibrationSet from_labeled(
      const std::vector<LabeledProbability>& examples) {
    CalibrationSet cal;
    for (const auto& ex : examples) {
      const Label label = ex.relevant ? Label::relevant : Label::irrelevant;
      cal.scores_for(label).push_back(nonconformity(ex.probability, label));
    }
    std::sort(cal.relevant_scores_.begin(), cal.relevant_scores_.end());
    std::sort(cal.irrelevant_scores_.begin(), cal.irrelevant_scores_.end());
    return cal;
  }

  std::size_t count(Label label) const {
    return label == Label::relevant ? relevant_scores_.size()
                                    : irrelevant_scores_.size();
  }

  const std::vector<double>& scores(Label label) const {
    return label == Label::relevant ? relevant_scores_ : irrelevant_scores_;
  }

  /// Number of calibration scores of `label` that are >= alpha.
  std::size_t count_at_least(Label label, double alpha) const {
    const auto& s = scores(label);
    return static_cast<std::size_t>(
        s.end() - std::lower_bound(s.begin(), s.end(), alpha));
  }

 private:
  std::vector<double>& scores_for(Label label) {
    return label == Label::relevant ? relevant_scores_ : irrelevant_scores_;
  }
  std::vector<double> relevant_scores_;
  std::vector<double> irrelevant_scores_;
};

inline CalibrationSet calibrate(
    const std::vector<LabeledProbability>& examples) {
  return CalibrationSet::from_labeled(examples);
}

/// p-value of a candidate's nonconformity under label k:
///   ( #{calibration alpha_i of class k : alpha_i >= alpha_new} + 1 ) / (n_k + 1)
/// Ties count (>=), the +1 terms stand in for the candidate itself, and an
/// empty class yields the vacuous p-value 1. No tie-break randomisation, so
/// identical inputs always give identical outputs.
inline double p_value(const CalibrationSet& calibration,
                      double candidate_nonconformity, Label label,
                      PValueMode mode = PValueMode::mondrian) {
  std::size_t at_least = 0;
  std::size_t total = 0;
  if (mode == PValueMode::mondrian) {
    at_least = calibration.count_at_least(label, candidate_nonconformity);
    total = calibration.count(label);
  } else {
    at_least =
        calibration.count_at_least(Label::relevant, candidate_nonconformity) +
        calibration.count_at_least(Label::irrelevant, candidate_nonconformity);
    total = calibration.count(Label::relevant) +
            calibration.count(Label::irrelevant);
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(total + 1);
}

struct PValuePair {
  double p_relevant = 1.0;
  double p_irrelevant = 1.0;
};

inline PValuePair p_values(const CalibrationSet& calibration,
                           double probability,
                           PValueMode mode = PValueMode::mondrian) {
  return {p_value(calibration, nonconformity(probability, Label::relevant),
                  Label::relevant, mode),
          p_value(calibration, nonconformity(probability, Label::irrelevant),
                  Label::irrelevant, mode)};
}

/// The labels whose p-value exceeds the significance level.
struct PredictionRegion {
  bool contains_relevant = false;
  bool contains_irrelevant = false;
  double epsilon = 0.0;

  bool empty() const { return !contains_relevant && !contains_irrelevant; }
  std::size_t size() const {
    return (contains_relevant ? 1u : 0u) + (contains_irrelevant ? 1u : 0u);
  }
};

inline PredictionRegion prediction_region(const PValuePair& p, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ValidationError("significance level must lie in [0,1]");
  }
  return {p.p_relevant > epsilon, p.p_irrelevant > epsilon, epsilon};
}

enum class Decision { accepted, rejected };

/// A candidate is an answer only when the region is exactly {relevant}: an
/// empty region and an ambiguous {0,1} region are both rejections.
inline Decision accept(const PredictionRegion& region) {
  return region.contains_relevant && !region.contains_irrelevant
             ? Decision::accepted
             : Decision::rejected;
}

/// Keeps, in their original order, the candidates whose prediction region is
/// exactly {relevant}. An empty result is the unanswerable verdict. The
/// calibration set must come from questions other than the list's own.
inline RankedList filter_ranked_list(const RankedList& list,
                                     const CalibrationSet& calibration,
                                     double epsilon,
                                     PValueMode mode = PValueMode::mondrian) {
  RankedList filtered{list.question_id, list.depth, {}};
  for (const auto& candidate : list.candidates) {
    const auto region = prediction_region(
        p_values(calibration, candidate.probability, mode), epsilon);
    if (accept(region) == Decision::accepted) {
      filtered.candidates.push_back(candidate);
    }
  }
  return filtered;
}

}  // namespace selrev
