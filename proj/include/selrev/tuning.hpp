#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "selrev/conformal.hpp"
#include "selrev/corpus.hpp"
#include "selrev/errors.hpp"
#include "selrev/metrics.hpp"
#include "selrev/scorers.hpp"

namespace selrev {

/// One scored (question, review) pair awaiting relevance decoration.
struct ScoredPair {
  std::string review_id;
  double raw_score = 0.0;
  double probability = 0.0;
};

/// Scorer output for one question: the depth-capped ranked list plus scores
/// for every judged pair (the future calibration examples). Independent of
/// the relevance threshold, so it is computed once and reused across taus.
struct ScoredQuestion {
  std::string question_id;
  std::vector<ScoredPair> ranked;
  std::vector<ScoredPair> judged_pairs;
};

using ScoredBase = std::vector<ScoredQuestion>;

/// A ranked candidate decorated with its effective relevance gain.
struct EvalCandidate {
  std::string review_id;
  double raw_score = 0.0;
  double probability = 0.0;
  double gain = 0.0;
};

/// Everything evaluation and tuning need to know about one question at one
/// relevance threshold.
struct QuestionContext {
  std::string question_id;
  bool answerable = false;
  int relevant_count = 0;
  std::vector<double> ideal_gains;
  std::vector<EvalCandidate> ranked;
  std::vector<LabeledProbability> labeled_pairs;
};

using QuestionSet = std::vector<QuestionContext>;

namespace detail {

inline std::vector<ScoredPair> to_scored_pairs(const RankedList& list) {
  std::vector<ScoredPair> out;
  out.reserve(list.candidates.size());
  for (const auto& c : list.candidates) {
    out.push_back({c.review_id, c.raw_score, c.probability});
  }
  return out;
}

inline void sort_base(ScoredBase& base) {
  std::sort(base.begin(), base.end(),
            [](const ScoredQuestion& a, const ScoredQuestion& b) {
              return a.question_id < b.question_id;
            });
}

}  // namespace detail

/// Scores every question with the built-in lexical scorer. Candidates are the
/// review sentences of the question's product.
inline ScoredBase build_scored_base(const Corpus& corpus,
                                    const Bm25Scorer& scorer, int depth) {
  std::unordered_map<std::string, std::vector<ReviewSentence>> by_product;
  for (const auto& review : corpus.reviews()) {
    by_product[review.product_id].push_back(review);
  }
  ScoredBase base;
  base.reserve(corpus.questions().size());
  for (const auto& question : corpus.questions()) {
    ScoredQuestion sq;
    sq.question_id = question.question_id;
    static const std::vector<ReviewSentence> kNone;
    auto it = by_product.find(question.product_id);
    const auto& candidates = it == by_product.end() ? kNone : it->second;
    sq.ranked =
        detail::to_scored_pairs(rank_reviews(question, candidates, scorer, depth));
    base.push_back(std::move(sq));
  }
  detail::sort_base(base);
  for (const auto& judgment : corpus.judgments()) {
    const auto& question = corpus.question(judgment.question_id);
    const auto& review = corpus.review(judgment.review_id);
    const double raw = scorer.score(question.text, review.text);
    auto sq = std::lower_bound(
        base.begin(), base.end(), judgment.question_id,
        [](const ScoredQuestion& a, const std::string& id) {
          return a.question_id < id;
        });
    sq->judged_pairs.push_back(
        {judgment.review_id, raw, score_to_probability(raw)});
  }
  return base;
}

/// Scores every question from an external score table. Candidates are the
/// pairs present in the table; judged pairs without a table entry are left
/// out of the calibration pool (that scorer can never rank them either).
inline ScoredBase build_scored_base(const Corpus& corpus,
                                    const ScoreTable& table, int depth) {
  ScoredBase base;
  base.reserve(corpus.questions().size());
  for (const auto& question : corpus.questions()) {
    ScoredQuestion sq;
    sq.question_id = question.question_id;
    RankedList list{question.question_id, depth,
                    table.candidates_for(question.question_id)};
    detail::sort_and_cap(list);
    sq.ranked = detail::to_scored_pairs(list);
    base.push_back(std::move(sq));
  }
  detail::sort_base(base);
  for (const auto& judgment : corpus.judgments()) {
    if (!table.contains(judgment.question_id, judgment.review_id)) continue;
    const auto scored = table.get(judgment.question_id, judgment.review_id);
    auto sq = std::lower_bound(
        base.begin(), base.end(), judgment.question_id,
        [](const ScoredQuestion& a, const std::string& id) {
          return a.question_id < id;
        });
    sq->judged_pairs.push_back(
        {judgment.review_id, scored.raw_score, scored.probability});
  }
  return base;
}

/// Decorates scorer output with gains and labels at one relevance threshold.
/// Every corpus question must be covered by the scored base.
inline QuestionSet attach_relevance(const Corpus& corpus,
                                    const ScoredBase& base,
                                    const ThresholdedCorpus& thresholded) {
  std::unordered_map<std::string, const ScoredQuestion*> by_id;
  for (const auto& sq : base) by_id[sq.question_id] = &sq;
  QuestionSet set;
  set.reserve(corpus.questions().size());
  for (const auto& id : corpus.sorted_question_ids()) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw ValidationError("missing ranked list for question '" + id + "'");
    }
    const ScoredQuestion& sq = *it->second;
    QuestionContext ctx;
    ctx.question_id = id;
    ctx.answerable = thresholded.answerable(id);
    ctx.relevant_count = thresholded.relevant_count(id);
    ctx.ideal_gains = thresholded.ideal_gains(id);
    ctx.ranked.reserve(sq.ranked.size());
    for (const auto& pair : sq.ranked) {
      ctx.ranked.push_back({pair.review_id, pair.raw_score, pair.probability,
                            thresholded.effective_relevance(id, pair.review_id)});
    }
    ctx.labeled_pairs.reserve(sq.judged_pairs.size());
    for (const auto& pair : sq.judged_pairs) {
      ctx.labeled_pairs.push_back(
          {pair.probability,
           thresholded.effective_relevance(id, pair.review_id) > 0.0});
    }
    set.push_back(std::move(ctx));
  }
  return set;
}

inline QuestionSet build_question_set(const Corpus& corpus,
                                      const ThresholdedCorpus& thresholded,
                                      const Bm25Scorer& scorer, int depth) {
  return attach_relevance(corpus, build_scored_base(corpus, scorer, depth),
                          thresholded);
}

inline QuestionSet build_question_set(const Corpus& corpus,
                                      const ThresholdedCorpus& thresholded,
                                      const ScoreTable& table, int depth) {
  return attach_relevance(corpus, build_scored_base(corpus, table, depth),
                          thresholded);
}

// --- scoring one question ----------------------------------------------------

namespace detail {

inline std::vector<double> gains_of(const std::vector<EvalCandidate>& list) {
  std::vector<double> gains;
  gains.reserve(list.size());
  for (const auto& c : list) gains.push_back(c.gain);
  return gains;
}

inline double question_ndcg(const QuestionContext& ctx,
                            const std::vector<double>& returned_gains) {
  return ndcg_prime(returned_gains, ctx.ideal_gains, ctx.relevant_count,
                    std::max<int>(1, static_cast<int>(returned_gains.size())));
}

}  // namespace detail

/// NDCG' of a question's full (unfiltered) ranked list.
inline QuestionScore score_question_vanilla(const QuestionContext& ctx) {
  return {ctx.question_id, ctx.answerable,
          detail::question_ndcg(ctx, detail::gains_of(ctx.ranked))};
}

/// Mean NDCG' per question group with no filtering applied.
inline AggregateScore evaluate_vanilla(const QuestionSet& questions) {
  std::vector<QuestionScore> scores;
  scores.reserve(questions.size());
  for (const auto& ctx : questions) {
    scores.push_back(score_question_vanilla(ctx));
  }
  return aggregate(scores);
}

// --- leave-one-out fold plans -------------------------------------------------

/// Deterministic leave-one-out folds over lexicographically sorted question
/// ids: fold i holds out question i and validates on the other n-1.
struct FoldPlan {
  struct OuterFold {
    std::string test_question;
    std::vector<std::string> validation;
  };
  std::vector<OuterFold> outer;

  static FoldPlan leave_one_out(std::vector<std::string> question_ids) {
    std::sort(question_ids.begin(), question_ids.end());
    FoldPlan plan;
    plan.outer.reserve(question_ids.size());
    for (std::size_t i = 0; i < question_ids.size(); ++i) {
      OuterFold fold;
      fold.test_question = question_ids[i];
      fold.validation.reserve(question_ids.size() - 1);
      for (std::size_t j = 0; j < question_ids.size(); ++j) {
        if (j != i) fold.validation.push_back(question_ids[j]);
      }
      plan.outer.push_back(std::move(fold));
    }
    return plan;
  }
};

// --- THRS: raw-score threshold tuning ------------------------------------------

struct TunedParameter {
  enum class Kind { score_threshold, epsilon };
  Kind kind = Kind::score_threshold;
  double value = 0.0;
  double objective = 0.0;
};

using QuestionView = std::vector<const QuestionContext*>;

inline QuestionView view_of(const QuestionSet& questions) {
  QuestionView view;
  view.reserve(questions.size());
  for (const auto& ctx : questions) view.push_back(&ctx);
  return view;
}

/// Calibration set pooled from every labeled pair of the given questions.
inline CalibrationSet calibration_from(const QuestionView& questions) {
  std::vector<LabeledProbability> pool;
  for (const auto* ctx : questions) {
    pool.insert(pool.end(), ctx->labeled_pairs.begin(),
                ctx->labeled_pairs.end());
  }
  return calibrate(pool);
}

/// Candidates surviving a raw-score threshold, original order kept.
inline std::vector<double> gains_at_threshold(const QuestionContext& ctx,
                                              double threshold) {
  std::vector<double> gains;
  for (const auto& c : ctx.ranked) {
    if (c.raw_score >= threshold) gains.push_back(c.gain);
  }
  return gains;
}

/// Threshold grid: midpoints between consecutive distinct observed candidate
/// scores, plus one sentinel below the minimum (keep everything) and one
/// above the maximum (drop everything).
inline std::vector<double> threshold_grid(const QuestionView& validation) {
  std::vector<double> observed;
  for (const auto* ctx : validation) {
    for (const auto& c : ctx->ranked) observed.push_back(c.raw_score);
  }
  if (observed.empty()) return {0.0};
  std::sort(observed.begin(), observed.end());
  observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
  std::vector<double> grid;
  grid.reserve(observed.size() + 1);
  grid.push_back(observed.front() - 1.0);
  for (std::size_t i = 0; i + 1 < observed.size(); ++i) {
    grid.push_back(0.5 * (observed[i] + observed[i + 1]));
  }
  grid.push_back(observed.back() + 1.0);
  return grid;
}

/// Picks the grid threshold maximising the validation objective; ties go to
/// the smallest threshold (retain more reviews).
///
/// The sweep walks the ascending grid while each question advances through
/// its own score breakpoints, so the work is O(candidates x list depth)
/// instead of O(grid x candidates).
inline TunedParameter tune_score_threshold(const QuestionView& validation) {
  const std::vector<double> grid = threshold_grid(validation);

  // Per question: breakpoints (its distinct raw scores, ascending) and the
  // NDCG' of the surviving list on each threshold segment. Segment j covers
  // thresholds in (break[j-1], break[j]]; the last segment is the empty list.
  struct Piecewise {
    std::vector<double> breaks;
    std::vector<double> values;
    std::size_t at = 0;
  };
  std::vector<Piecewise> pieces(validation.size());
  std::vector<QuestionScore> current(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const QuestionContext& ctx = *validation[i];
    auto& pw = pieces[i];
    for (const auto& c : ctx.ranked) pw.breaks.push_back(c.raw_score);
    std::sort(pw.breaks.begin(), pw.breaks.end());
    pw.breaks.erase(std::unique(pw.breaks.begin(), pw.breaks.end()),
                    pw.breaks.end());
    pw.values.reserve(pw.breaks.size() + 1);
    for (double b : pw.breaks) {
      pw.values.push_back(detail::question_ndcg(ctx, gains_at_threshold(ctx, b)));
    }
    pw.values.push_back(detail::question_ndcg(ctx, {}));
    current[i] = {ctx.question_id, ctx.answerable, pw.values.front()};
  }

  TunedParameter best{TunedParameter::Kind::score_threshold, grid.front(), -1.0};
  for (double threshold : grid) {
    for (std::size_t i = 0; i < validation.size(); ++i) {
      auto& pw = pieces[i];
      while (pw.at < pw.breaks.size() && pw.breaks[pw.at] < threshold) ++pw.at;
      current[i].ndcg_prime = pw.values[pw.at];
    }
    const double objective = aggregate_with_fallback(current);
    if (objective > best.objective) {
      best.value = threshold;
      best.objective = objective;
    }
  }
  return best;
}

inline TunedParameter tune_score_threshold(const QuestionSet& validation) {
  return tune_score_threshold(view_of(validation));
}

// --- IMCP: significance-level tuning --------------------------------------------

/// The inclusive significance grid 0, step, 2*step, ..., 1.
struct EpsilonGrid {
  std::vector<double> values;

  static EpsilonGrid with_step(double step) {
    if (!(step > 0.0 && step <= 1.0)) {
      throw ValidationError("epsilon step must lie in (0,1]");
    }
    EpsilonGrid grid;
    for (int i = 0;; ++i) {
      const double value = i * step;
      if (value >= 1.0) break;
      grid.values.push_back(value);
    }
    grid.values.push_back(1.0);
    return grid;
  }
};

namespace detail {

/// Per-class nonconformity scores of a question group, arranged so that the
/// calibration set "everyone except question i" supports p-value queries
/// without re-sorting: counts against the pooled sorted scores minus counts
/// against the excluded question's own (small, sorted) scores.
class LooCalibration {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  explicit LooCalibration(const QuestionView& questions)
      : per_question_(questions.size()) {
    for (std::size_t i = 0; i < questions.size(); ++i) {
      for (const auto& pair : questions[i]->labeled_pairs) {
        const Label label =
            pair.relevant ? Label::relevant : Label::irrelevant;
        const double alpha = nonconformity(pair.probability, label);
        scores(per_question_[i], label).push_back(alpha);
        scores(pooled_, label).push_back(alpha);
      }
    }
    for (auto& class_scores : pooled_) {
      std::sort(class_scores.begin(), class_scores.end());
    }
    for (auto& question : per_question_) {
      for (auto& class_scores : question) {
        std::sort(class_scores.begin(), class_scores.end());
      }
    }
  }

  /// p-values for a candidate probability with question `excluded` held out
  /// of the calibration pool (npos excludes nothing).
  PValuePair p_values_excluding(std::size_t excluded, double probability,
                                PValueMode mode) const {
    return {p_value_excluding(excluded, probability, Label::relevant, mode),
            p_value_excluding(excluded, probability, Label::irrelevant, mode)};
  }

 private:
  using ClassScores = std::array<std::vector<double>, 2>;

  static std::vector<double>& scores(ClassScores& cs, Label label) {
    return cs[static_cast<std::size_t>(label)];
  }
  static const std::vector<double>& scores(const ClassScores& cs, Label label) {
    return cs[static_cast<std::size_t>(label)];
  }

  static std::size_t count_at_least(const std::vector<double>& sorted,
                                    double alpha) {
    return static_cast<std::size_t>(
        sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), alpha));
  }

  double p_value_excluding(std::size_t excluded, double probability,
                           Label label, PValueMode mode) const {
    // The candidate's score under the hypothesised label is compared against
    // the calibration scores of that label only (mondrian) or against every
    // stored score regardless of its label (pooled).
    const double alpha = nonconformity(probability, label);
    std::size_t at_least = 0;
    std::size_t total = 0;
    const auto tally = [&](Label k) {
      at_least += count_at_least(scores(pooled_, k), alpha);
      total += scores(pooled_, k).size();
      if (excluded != npos) {
        at_least -= count_at_least(scores(per_question_[excluded], k), alpha);
        total -= scores(per_question_[excluded], k).size();
      }
    };
    if (mode == PValueMode::mondrian) {
      tally(label);
    } else {
      tally(Label::relevant);
      tally(Label::irrelevant);
    }
    return static_cast<double>(at_least + 1) / static_cast<double>(total + 1);
  }

  ClassScores pooled_;
  std::vector<ClassScores> per_question_;
};

}  // namespace detail

/// Nested leave-one-out tuning of the significance level: each validation
/// question is scored with p-values calibrated on the other validation
/// questions, every grid epsilon filters those lists, and the epsilon with
/// the best aggregated objective wins. Ties go to the smallest epsilon.
inline TunedParameter tune_epsilon(const QuestionView& validation,
                                   const EpsilonGrid& grid,
                                   PValueMode mode = PValueMode::mondrian) {
  if (validation.size() < 3) {
    throw ValidationError("epsilon tuning needs at least 3 validation questions");
  }
  const detail::LooCalibration calibration(validation);

  // p-value pairs per inner fold, computed once.
  std::vector<std::vector<PValuePair>> fold_pvalues(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const auto& ranked = validation[i]->ranked;
    fold_pvalues[i].reserve(ranked.size());
    for (const auto& c : ranked) {
      fold_pvalues[i].push_back(
          calibration.p_values_excluding(i, c.probability, mode));
    }
  }

  TunedParameter best{TunedParameter::Kind::epsilon, 0.0, -1.0};
  std::vector<QuestionScore> scores(validation.size());
  std::vector<double> retained;
  for (double epsilon : grid.values) {
    for (std::size_t i = 0; i < validation.size(); ++i) {
      const QuestionContext& ctx = *validation[i];
      retained.clear();
      for (std::size_t c = 0; c < ctx.ranked.size(); ++c) {
        const auto& pv = fold_pvalues[i][c];
        if (pv.p_relevant > epsilon && pv.p_irrelevant <= epsilon) {
          retained.push_back(ctx.ranked[c].gain);
        }
      }
      scores[i] = {ctx.question_id, ctx.answerable,
                   detail::question_ndcg(ctx, retained)};
    }
    const double objective = aggregate_with_fallback(scores);
    if (objective > best.objective) {
      best.value = epsilon;
      best.objective = objective;
    }
  }
  return best;
}

inline TunedParameter tune_epsilon(const QuestionSet& validation,
                                   const EpsilonGrid& grid,
                                   PValueMode mode = PValueMode::mondrian) {
  return tune_epsilon(view_of(validation), grid, mode);
}

// --- the leave-one-out experiment ------------------------------------------------

enum class Method { vanilla, thrs, imcp };

inline Method parse_method(const std::string& name) {
  if (name == "vanilla") return Method::vanilla;
  if (name == "thrs") return Method::thrs;
  if (name == "imcp") return Method::imcp;
  throw ValidationError("unknown method '" + name +
                        "' (expected vanilla, thrs or imcp)");
}

inline const char* method_name(Method method) {
  switch (method) {
    case Method::vanilla: return "vanilla";
    case Method::thrs: return "thrs";
    case Method::imcp: return "imcp";
  }
  return "?";
}

struct LooOptions {
  EpsilonGrid epsilon_grid = EpsilonGrid::with_step(0.01);
  PValueMode p_value_mode = PValueMode::mondrian;
};

struct LooResult {
  AggregateScore aggregate;
  std::vector<QuestionScore> question_scores;
  std::vector<TunedParameter> fold_parameters;  // empty for vanilla
};

namespace detail {

inline bool is_ordered_subsequence(const RankedList& part,
                                   const RankedList& whole) {
  std::size_t j = 0;
  for (const auto& c : part.candidates) {
    while (j < whole.candidates.size() &&
           whole.candidates[j].review_id != c.review_id) {
      ++j;
    }
    if (j == whole.candidates.size()) return false;
    ++j;
  }
  return true;
}

inline RankedList as_ranked_list(const QuestionContext& ctx) {
  RankedList list{ctx.question_id, static_cast<int>(ctx.ranked.size()), {}};
  for (const auto& c : ctx.ranked) {
    list.candidates.push_back(
        {ctx.question_id, c.review_id, c.raw_score, c.probability});
  }
  return list;
}

inline std::vector<double> gains_for_ids(const QuestionContext& ctx,
                                         const RankedList& list) {
  std::unordered_map<std::string, double> gain_of;
  for (const auto& c : ctx.ranked) gain_of[c.review_id] = c.gain;
  std::vector<double> gains;
  gains.reserve(list.candidates.size());
  for (const auto& c : list.candidates) gains.push_back(gain_of.at(c.review_id));
  return gains;
}

}  // namespace detail

/// Runs the full leave-one-out experiment: every fold tunes its parameter on
/// the other questions (nothing for vanilla), applies it to the held-out
/// question's list, and the per-question scores are aggregated at the end.
/// The held-out question's judgments never touch its own tuned parameter.
inline LooResult loo_experiment(const QuestionSet& questions, Method method,
                                const LooOptions& options = {}) {
  LooResult result;
  if (method == Method::vanilla) {
    for (const auto& ctx : questions) {
      result.question_scores.push_back(score_question_vanilla(ctx));
    }
    result.aggregate = aggregate(result.question_scores);
    return result;
  }

  const QuestionView all = view_of(questions);
  for (std::size_t test = 0; test < questions.size(); ++test) {
    QuestionView validation;
    validation.reserve(all.size() - 1);
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (i != test) validation.push_back(all[i]);
    }
    const QuestionContext& held_out = questions[test];

    QuestionScore score{held_out.question_id, held_out.answerable, 0.0};
    if (method == Method::thrs) {
      const TunedParameter tuned = tune_score_threshold(validation);
      score.ndcg_prime = detail::question_ndcg(
          held_out, gains_at_threshold(held_out, tuned.value));
      result.fold_parameters.push_back(tuned);
    } else {
      const TunedParameter tuned =
          tune_epsilon(validation, options.epsilon_grid, options.p_value_mode);
      const CalibrationSet calibration = calibration_from(validation);
      const RankedList vanilla_list = detail::as_ranked_list(held_out);
      const RankedList filtered = filter_ranked_list(
          vanilla_list, calibration, tuned.value, options.p_value_mode);
      if (!detail::is_ordered_subsequence(filtered, vanilla_list)) {
        throw InternalError("rejection reordered a ranked list");
      }
      score.ndcg_prime = detail::question_ndcg(
          held_out, detail::gains_for_ids(held_out, filtered));
      result.fold_parameters.push_back(tuned);
    }
    result.question_scores.push_back(score);
  }
  result.aggregate = aggregate(result.question_scores);
  return result;
}

}  // namespace selrev
