#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "selrev/errors.hpp"

namespace selrev {

inline constexpr int kDefaultDepth = 10;

/// Gain of the terminal document appended to a returned list: 1 when the
/// question has no relevant reviews at all, otherwise the retrieved relevance
/// mass divided by the relevant-review count R. Rewards quitting early.
inline double terminal_gain(const std::vector<double>& returned_gains, int R) {
  if (R < 0) throw ValidationError("relevant count R must be non-negative");
  if (R == 0) return 1.0;
  double sum = 0.0;
  for (double g : returned_gains) sum += g;
  return sum / static_cast<double>(R);
}

/// Plain discounted cumulative gain with linear gains: sum g_i / log2(i + 1)
/// over 1-based positions.
inline double dcg(const std::vector<double>& gains) {
  double total = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    total += gains[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

/// NDCG', the variant that appends a terminal document so truncated and empty
/// lists are scored sensibly for unanswerable questions.
///
/// The returned list (capped at d_cap) gets the terminal gain appended; the
/// ideal list is all relevant gains sorted descending, then the ideal
/// terminal gain (1 when R = 0), then zero padding, truncated to the same
/// length d + 1. The score is the ratio of the two DCGs.
inline double ndcg_prime(const std::vector<double>& returned_gains,
                         const std::vector<double>& ideal_gains, int R,
                         int d_cap = kDefaultDepth) {
  if (d_cap <= 0) throw ValidationError("d_cap must be positive");
  if (R < 0) throw ValidationError("relevant count R must be non-negative");
  if (static_cast<std::size_t>(R) != ideal_gains.size()) {
    throw ValidationError("R must equal the number of ideal gains");
  }

  std::vector<double> returned(
      returned_gains.begin(),
      returned_gains.begin() +
          std::min(returned_gains.size(), static_cast<std::size_t>(d_cap)));
  const std::size_t d = returned.size();
  returned.push_back(terminal_gain(returned, R));

  std::vector<double> ideal = ideal_gains;
  std::sort(ideal.begin(), ideal.end(), std::greater<double>());
  ideal.push_back(terminal_gain(ideal_gains, R));
  ideal.resize(d + 1, 0.0);

  const double idcg = dcg(ideal);
  if (!(idcg > 0.0)) {
    throw InternalError("ideal DCG is not positive");
  }
  return dcg(returned) / idcg;
}

struct QuestionScore {
  std::string question_id;
  bool answerable = false;
  double ndcg_prime = 0.0;
};

struct AggregateScore {
  double n_a = 0.0;   ///< mean NDCG' over answerable questions
  double n_u = 0.0;   ///< mean NDCG' over unanswerable questions
  double n_au = 0.0;  ///< geometric mean of the two
};

namespace detail {
inline double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}
}  // namespace detail

/// Arithmetic mean per question group, then the geometric mean across the two
/// groups. Both groups must be represented; tuning callers that can face a
/// one-group split use `aggregate_with_fallback` instead.
inline AggregateScore aggregate(const std::vector<QuestionScore>& scores) {
  std::vector<double> answerable;
  std::vector<double> unanswerable;
  for (const auto& s : scores) {
    (s.answerable ? answerable : unanswerable).push_back(s.ndcg_prime);
  }
  if (answerable.empty() || unanswerable.empty()) {
    throw ValidationError(
        "aggregate requires at least one answerable and one unanswerable "
        "question");
  }
  AggregateScore out;
  out.n_a = detail::mean(answerable);
  out.n_u = detail::mean(unanswerable);
  out.n_au = std::sqrt(out.n_a * out.n_u);
  return out;
}

/// Objective used during tuning: the usual geometric mean, degrading to the
/// mean of whichever group is present when a validation split happens to
/// contain only one kind of question.
inline double aggregate_with_fallback(const std::vector<QuestionScore>& scores) {
  std::vector<double> answerable;
  std::vector<double> unanswerable;
  for (const auto& s : scores) {
    (s.answerable ? answerable : unanswerable).push_back(s.ndcg_prime);
  }
  if (answerable.empty() && unanswerable.empty()) {
    throw ValidationError("cannot aggregate an empty score list");
  }
  if (answerable.empty()) return detail::mean(unanswerable);
  if (unanswerable.empty()) return detail::mean(answerable);
  return std::sqrt(detail::mean(answerable) * detail::mean(unanswerable));
}

}  // namespace selrev
