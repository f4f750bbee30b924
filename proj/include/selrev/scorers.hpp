#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "selrev/corpus.hpp"
#include "selrev/errors.hpp"
#include "selrev/jsonl.hpp"

namespace selrev {

enum class ScoreKind { probability, raw };

inline ScoreKind parse_score_kind(const std::string& text) {
  if (text == "probability") return ScoreKind::probability;
  if (text == "raw") return ScoreKind::raw;
  throw ValidationError("score_kind must be 'probability' or 'raw', got '" +
                        text + "'");
}

inline const char* score_kind_name(ScoreKind kind) {
  return kind == ScoreKind::probability ? "probability" : "raw";
}

/// Maps a non-negative relevance score onto (0,1) with the sigmoid of its
/// logarithm, which collapses to s / (s + 1). Non-positive scores floor to
/// probability 0 so that zero-score candidates stay representable; they are
/// never accepted downstream anyway. Strictly increasing for s > 0.
inline double score_to_probability(double raw_score) {
  if (raw_score <= 0.0) return 0.0;
  return raw_score / (raw_score + 1.0);
}

/// Kind-aware conversion: probabilistic scorers pass through unchanged (after
/// a range check), raw scorers go through the sigmoid-of-log map.
inline double score_to_probability(double score, ScoreKind kind) {
  if (kind == ScoreKind::probability) {
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ValidationError("probabilistic score outside [0,1]: " +
                            std::to_string(score));
    }
    return score;
  }
  return score_to_probability(score);
}

/// Lowercased alphanumeric tokens; every other byte separates. No stemming.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// Document frequencies and average length over a review-sentence collection.
struct CollectionStats {
  std::size_t review_count = 0;
  double average_length = 0.0;
  std::unordered_map<std::string, std::size_t> document_frequency;

  static CollectionStats build(const std::vector<ReviewSentence>& reviews) {
    CollectionStats stats;
    stats.review_count = reviews.size();
    std::size_t total_length = 0;
    for (const auto& review : reviews) {
      const auto tokens = tokenize(review.text);
      total_length += tokens.size();
      std::unordered_set<std::string> seen(tokens.begin(), tokens.end());
      for (const auto& term : seen) {
        ++stats.document_frequency[term];
      }
    }
    stats.average_length =
        stats.review_count == 0
            ? 0.0
            : static_cast<double>(total_length) /
                  static_cast<double>(stats.review_count);
    return stats;
  }

  std::size_t df(const std::string& term) const {
    auto it = document_frequency.find(term);
    return it == document_frequency.end() ? 0 : it->second;
  }
};

/// Okapi scorer over review sentences with the usual k1 = 1.2, b = 0.75.
/// The +1 inside the idf log keeps every term contribution non-negative, so
/// scores are 0 exactly when question and review share no vocabulary.
class Bm25Scorer {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;

  explicit Bm25Scorer(CollectionStats stats) : stats_(std::move(stats)) {}

  static double idf(std::size_t review_count, std::size_t df) {
    const double n = static_cast<double>(review_count);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
  }

  double score(std::string_view question_text,
               std::string_view review_text) const {
    const auto query_tokens = tokenize(question_text);
    if (query_tokens.empty()) {
      throw ValidationError("question has no usable terms after tokenization");
    }
    const auto review_tokens = tokenize(review_text);
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : review_tokens) ++tf[t];
    const double dl = static_cast<double>(review_tokens.size());

    // Each distinct query term contributes once.
    std::unordered_set<std::string> distinct(query_tokens.begin(),
                                             query_tokens.end());
    double total = 0.0;
    for (const auto& term : distinct) {
      auto it = tf.find(term);
      if (it == tf.end()) continue;
      const double f = static_cast<double>(it->second);
      const double norm =
          kK1 * (1.0 - kB + kB * dl / std::max(stats_.average_length, 1e-12));
      total += idf(stats_.review_count, stats_.df(term)) * (f * (kK1 + 1.0)) /
               (f + norm);
    }
    return total;
  }

  const CollectionStats& stats() const { return stats_; }

 private:
  CollectionStats stats_;
};

inline double lexical_score(std::string_view question_text,
                            std::string_view review_text,
                            const CollectionStats& stats) {
  return Bm25Scorer(stats).score(question_text, review_text);
}

struct ScoredCandidate {
  std::string question_id;
  std::string review_id;
  double raw_score = 0.0;
  double probability = 0.0;
};

/// Top-d candidates of one question, descending by probability; probability
/// ties fall back to review_id order so repeat runs agree byte for byte.
struct RankedList {
  std::string question_id;
  int depth = 0;
  std::vector<ScoredCandidate> candidates;
};

/// Externally produced (question, review) scores keyed by pair.
class ScoreTable {
 public:
  explicit ScoreTable(ScoreKind kind) : kind_(kind) {}

  ScoreKind kind() const { return kind_; }

  void add(const std::string& question_id, const std::string& review_id,
           double score) {
    const double probability = score_to_probability(score, kind_);
    auto& per_question = scores_[question_id];
    if (!per_question.emplace(review_id, Entry{score, probability}).second) {
      throw DataError("duplicate score for (" + question_id + ", " +
                      review_id + ")");
    }
  }

  bool contains(const std::string& question_id,
                const std::string& review_id) const {
    auto qit = scores_.find(question_id);
    return qit != scores_.end() &&
           qit->second.find(review_id) != qit->second.end();
  }

  ScoredCandidate get(const std::string& question_id,
                      const std::string& review_id) const {
    auto qit = scores_.find(question_id);
    if (qit != scores_.end()) {
      auto rit = qit->second.find(review_id);
      if (rit != qit->second.end()) {
        return {question_id, review_id, rit->second.raw,
                rit->second.probability};
      }
    }
    throw DataError("no score for (" + question_id + ", " + review_id + ")");
  }

  /// Every scored candidate of one question, unordered.
  std::vector<ScoredCandidate> candidates_for(
      const std::string& question_id) const {
    std::vector<ScoredCandidate> out;
    auto qit = scores_.find(question_id);
    if (qit == scores_.end()) return out;
    out.reserve(qit->second.size());
    for (const auto& [review_id, entry] : qit->second) {
      out.push_back({question_id, review_id, entry.raw, entry.probability});
    }
    return out;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [qid, m] : scores_) n += m.size();
    return n;
  }

 private:
  struct Entry {
    double raw;
    double probability;
  };
  ScoreKind kind_;
  std::unordered_map<std::string, std::unordered_map<std::string, Entry>>
      scores_;
};

/// Loads a line-delimited score file. The first record is a header object
/// declaring {"score_kind": "probability"|"raw"}; the remaining records carry
/// (question_id, review_id, score). When `expected_kind` is supplied it must
/// match the header, and it stands in for a missing header.
inline ScoreTable load_external_scores(
    const std::string& path,
    std::optional<ScoreKind> expected_kind = std::nullopt) {
  std::optional<ScoreKind> declared;
  std::vector<std::tuple<std::size_t, std::string, std::string, double>> rows;
  bool first_record = true;
  for_each_jsonl_record(path, [&](std::size_t line, const nlohmann::json& rec) {
    if (first_record) {
      first_record = false;
      if (auto it = rec.find("score_kind"); it != rec.end()) {
        try {
          declared = parse_score_kind(it->get<std::string>());
        } catch (const ValidationError& e) {
          throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
        }
        return;
      }
    }
    rows.emplace_back(
        line, require_field<std::string>(rec, "question_id", path, line),
        require_field<std::string>(rec, "review_id", path, line),
        require_field<double>(rec, "score", path, line));
  });
  if (declared && expected_kind && *declared != *expected_kind) {
    throw DataError(path + ": score_kind header '" +
                    score_kind_name(*declared) + "' contradicts requested '" +
                    score_kind_name(*expected_kind) + "'");
  }
  if (!declared && !expected_kind) {
    throw DataError(path + ": missing score_kind header record");
  }
  ScoreTable table(declared ? *declared : *expected_kind);
  for (const auto& [line, qid, rid, score] : rows) {
    try {
      table.add(qid, rid, score);
    } catch (const ValidationError& e) {
      throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return table;
}

namespace detail {
inline void sort_and_cap(RankedList& list) {
  std::sort(list.candidates.begin(), list.candidates.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.probability != b.probability) {
                return a.probability > b.probability;
              }
              return a.review_id < b.review_id;
            });
  if (list.candidates.size() > static_cast<std::size_t>(list.depth)) {
    list.candidates.resize(static_cast<std::size_t>(list.depth));
  }
}
}  // namespace detail

/// Ranks explicit candidates of one question using a score table.
inline RankedList rank_reviews(const Question& question,
                               const std::vector<std::string>& candidate_ids,
                               const ScoreTable& table, int depth) {
  if (depth <= 0) throw ValidationError("ranking depth must be positive");
  RankedList list{question.question_id, depth, {}};
  list.candidates.reserve(candidate_ids.size());
  for (const auto& review_id : candidate_ids) {
    list.candidates.push_back(table.get(question.question_id, review_id));
  }
  detail::sort_and_cap(list);
  return list;
}

/// Ranks candidate reviews of one question with the built-in lexical scorer.
inline RankedList rank_reviews(const Question& question,
                               const std::vector<ReviewSentence>& candidates,
                               const Bm25Scorer& scorer, int depth) {
  if (depth <= 0) throw ValidationError("ranking depth must be positive");
  RankedList list{question.question_id, depth, {}};
  list.candidates.reserve(candidates.size());
  for (const auto& review : candidates) {
    const double raw = scorer.score(question.text, review.text);
    list.candidates.push_back({question.question_id, review.review_id, raw,
                               score_to_probability(raw)});
  }
  detail::sort_and_cap(list);
  return list;
}

}  // namespace selrev
