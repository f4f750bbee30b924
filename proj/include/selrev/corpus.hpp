#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "selrev/errors.hpp"
#include "selrev/jsonl.hpp"

namespace selrev {

inline constexpr double kMaxRelevance = 3.0;

struct Question {
  std::string question_id;
  std::string product_id;
  std::string text;
  std::optional<std::string> category;
};

struct ReviewSentence {
  std::string review_id;
  std::string product_id;
  std::string text;
};

/// One graded judgment for a (question, review) pair. `mean_relevance` is the
/// mean of the annotator scores on the 0..3 scale; the individual scores are
/// kept only when the input provides them.
struct RelevanceJudgment {
  std::string question_id;
  std::string review_id;
  double mean_relevance = 0.0;
  std::optional<std::vector<int>> raw_scores;
};

/// Cross-referenced question/review/judgment collections. Immutable after
/// construction; safe to share across threads.
class Corpus {
 public:
  Corpus(std::vector<Question> questions, std::vector<ReviewSentence> reviews,
         std::vector<RelevanceJudgment> judgments)
      : questions_(std::move(questions)),
        reviews_(std::move(reviews)),
        judgments_(std::move(judgments)) {
    for (std::size_t i = 0; i < questions_.size(); ++i) {
      const auto& q = questions_[i];
      if (q.text.empty()) {
        throw DataError("question '" + q.question_id + "' has empty text");
      }
      if (!question_index_.emplace(q.question_id, i).second) {
        throw DataError("duplicate question_id '" + q.question_id + "'");
      }
    }
    for (std::size_t i = 0; i < reviews_.size(); ++i) {
      const auto& r = reviews_[i];
      if (r.text.empty()) {
        throw DataError("review '" + r.review_id + "' has empty text");
      }
      if (!review_index_.emplace(r.review_id, i).second) {
        throw DataError("duplicate review_id '" + r.review_id + "'");
      }
    }
    std::unordered_set<std::string> seen_pairs;
    for (const auto& j : judgments_) {
      if (question_index_.find(j.question_id) == question_index_.end()) {
        throw DataError("judgment references unknown question_id '" +
                        j.question_id + "'");
      }
      if (review_index_.find(j.review_id) == review_index_.end()) {
        throw DataError("judgment references unknown review_id '" +
                        j.review_id + "'");
      }
      validate_judgment(j);
      if (!seen_pairs.insert(j.question_id + "\x1f" + j.review_id).second) {
        throw DataError("duplicate judgment for (" + j.question_id + ", " +
                        j.review_id + ")");
      }
    }
  }

  const std::vector<Question>& questions() const { return questions_; }
  const std::vector<ReviewSentence>& reviews() const { return reviews_; }
  const std::vector<RelevanceJudgment>& judgments() const { return judgments_; }

  const Question& question(const std::string& question_id) const {
    auto it = question_index_.find(question_id);
    if (it == question_index_.end()) {
      throw DataError("unknown question_id '" + question_id + "'");
    }
    return questions_[it->second];
  }

  const ReviewSentence& review(const std::string& review_id) const {
    auto it = review_index_.find(review_id);
    if (it == review_index_.end()) {
      throw DataError("unknown review_id '" + review_id + "'");
    }
    return reviews_[it->second];
  }

  bool has_question(const std::string& question_id) const {
    return question_index_.count(question_id) > 0;
  }

  /// Question ids in lexicographic order. Every fold plan and reduction in
  /// the library iterates in this order so results are machine-independent.
  std::vector<std::string> sorted_question_ids() const {
    std::vector<std::string> ids;
    ids.reserve(questions_.size());
    for (const auto& q : questions_) ids.push_back(q.question_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  static void validate_judgment(const RelevanceJudgment& j) {
    if (!(j.mean_relevance >= 0.0 && j.mean_relevance <= kMaxRelevance)) {
      throw DataError("judgment (" + j.question_id + ", " + j.review_id +
                      ") has mean_relevance outside [0,3]");
    }
    if (j.raw_scores) {
      if (j.raw_scores->empty()) {
        throw DataError("judgment (" + j.question_id + ", " + j.review_id +
                        ") has empty raw_scores");
      }
      double sum = 0.0;
      for (int s : *j.raw_scores) {
        if (s < 0 || s > 3) {
          throw DataError("judgment (" + j.question_id + ", " + j.review_id +
                          ") has raw score outside {0,1,2,3}");
        }
        sum += s;
      }
      const double mean = sum / static_cast<double>(j.raw_scores->size());
      if (std::abs(mean - j.mean_relevance) > 1e-9) {
        throw DataError("judgment (" + j.question_id + ", " + j.review_id +
                        ") mean_relevance does not match raw_scores");
      }
    }
  }

  std::vector<Question> questions_;
  std::vector<ReviewSentence> reviews_;
  std::vector<RelevanceJudgment> judgments_;
  std::unordered_map<std::string, std::size_t> question_index_;
  std::unordered_map<std::string, std::size_t> review_index_;
};

/// A corpus with a relevance threshold tau applied: judged scores below tau
/// are zeroed, a question is answerable iff it keeps at least one positive
/// score. Pairs the annotation never covered count as relevance 0.
class ThresholdedCorpus {
 public:
  ThresholdedCorpus(const Corpus& corpus, double tau) : tau_(tau) {
    if (!(tau >= 0.0 && tau <= kMaxRelevance)) {
      throw ValidationError("relevance threshold must lie in [0,3]");
    }
    for (const auto& q : corpus.questions()) {
      relevant_count_[q.question_id] = 0;
    }
    for (const auto& j : corpus.judgments()) {
      const double effective = j.mean_relevance >= tau ? j.mean_relevance : 0.0;
      effective_[j.question_id][j.review_id] = effective;
      if (effective > 0.0) {
        ++relevant_count_[j.question_id];
      }
    }
  }

  double tau() const { return tau_; }

  /// Effective relevance of a pair; 0.0 for pairs without a judgment.
  double effective_relevance(const std::string& question_id,
                             const std::string& review_id) const {
    auto qit = effective_.find(question_id);
    if (qit == effective_.end()) return 0.0;
    auto rit = qit->second.find(review_id);
    return rit == qit->second.end() ? 0.0 : rit->second;
  }

  bool answerable(const std::string& question_id) const {
    return relevant_count(question_id) > 0;
  }

  /// Number of ground-truth relevant reviews for the question.
  int relevant_count(const std::string& question_id) const {
    auto it = relevant_count_.find(question_id);
    return it == relevant_count_.end() ? 0 : it->second;
  }

  /// Effective relevance of every relevant review, sorted descending: the
  /// gain profile of a perfect retrieval run.
  std::vector<double> ideal_gains(const std::string& question_id) const {
    std::vector<double> gains;
    auto qit = effective_.find(question_id);
    if (qit != effective_.end()) {
      for (const auto& [review_id, value] : qit->second) {
        if (value > 0.0) gains.push_back(value);
      }
    }
    std::sort(gains.begin(), gains.end(), std::greater<double>());
    return gains;
  }

  std::size_t total_relevant_pairs() const {
    std::size_t n = 0;
    for (const auto& [qid, count] : relevant_count_) {
      n += static_cast<std::size_t>(count);
    }
    return n;
  }

  std::size_t answerable_question_count() const {
    std::size_t n = 0;
    for (const auto& [qid, count] : relevant_count_) {
      if (count > 0) ++n;
    }
    return n;
  }

  std::size_t question_count() const { return relevant_count_.size(); }

 private:
  double tau_;
  std::unordered_map<std::string, std::unordered_map<std::string, double>>
      effective_;
  std::unordered_map<std::string, int> relevant_count_;
};

inline ThresholdedCorpus apply_relevance_threshold(const Corpus& corpus,
                                                   double tau) {
  return ThresholdedCorpus(corpus, tau);
}

struct StatsRow {
  double tau = 0.0;
  std::size_t relevant_reviews = 0;
  std::size_t answerable_questions = 0;
  double answerable_fraction = 0.0;
};

inline StatsRow corpus_stats(const ThresholdedCorpus& thresholded) {
  StatsRow row;
  row.tau = thresholded.tau();
  row.relevant_reviews = thresholded.total_relevant_pairs();
  row.answerable_questions = thresholded.answerable_question_count();
  row.answerable_fraction =
      thresholded.question_count() == 0
          ? 0.0
          : static_cast<double>(row.answerable_questions) /
                static_cast<double>(thresholded.question_count());
  return row;
}

// --- line-delimited loaders -------------------------------------------------

inline std::vector<Question> load_questions(const std::string& path) {
  std::vector<Question> questions;
  for_each_jsonl_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    Question q;
    q.question_id = require_field<std::string>(rec, "question_id", path, line);
    q.product_id = require_field<std::string>(rec, "product_id", path, line);
    q.text = require_field<std::string>(rec, "text", path, line);
    if (auto it = rec.find("category"); it != rec.end() && !it->is_null()) {
      q.category = it->get<std::string>();
    }
    questions.push_back(std::move(q));
  });
  return questions;
}

inline std::vector<ReviewSentence> load_reviews(const std::string& path) {
  std::vector<ReviewSentence> reviews;
  for_each_jsonl_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    ReviewSentence r;
    r.review_id = require_field<std::string>(rec, "review_id", path, line);
    r.product_id = require_field<std::string>(rec, "product_id", path, line);
    r.text = require_field<std::string>(rec, "text", path, line);
    reviews.push_back(std::move(r));
  });
  return reviews;
}

inline std::vector<RelevanceJudgment> load_judgments(const std::string& path) {
  std::vector<RelevanceJudgment> judgments;
  for_each_jsonl_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    RelevanceJudgment j;
    j.question_id = require_field<std::string>(rec, "question_id", path, line);
    j.review_id = require_field<std::string>(rec, "review_id", path, line);
    j.mean_relevance = require_field<double>(rec, "mean_relevance", path, line);
    if (auto it = rec.find("raw_scores"); it != rec.end() && !it->is_null()) {
      try {
        j.raw_scores = it->get<std::vector<int>>();
      } catch (const nlohmann::json::type_error&) {
        throw DataError(path + ":" + std::to_string(line) +
                        ": field 'raw_scores' has the wrong type");
      }
    }
    judgments.push_back(std::move(j));
  });
  return judgments;
}

inline Corpus load_corpus(const std::string& question_path,
                          const std::string& review_path,
                          const std::string& judgment_path) {
  return Corpus(load_questions(question_path), load_reviews(review_path),
                load_judgments(judgment_path));
}

}  // namespace selrev
