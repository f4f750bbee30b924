#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "selrev/scorers.hpp"
#include "test_support.hpp"

using namespace selrev;

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("Does it FOLD-flat? (yes)") ==
        std::vector<std::string>{"does", "it", "fold", "flat", "yes"});
  CHECK(tokenize("...!!!").empty());
  CHECK(tokenize("x1 2y") == std::vector<std::string>{"x1", "2y"});
}

namespace {

// Three-review toy collection: lengths 4, 3, 4, so avgdl = 11/3.
std::vector<ReviewSentence> toy_reviews() {
  return {
      {"r1", "p1", "solar panel charges quickly"},
      {"r2", "p1", "battery lasts long"},
      {"r3", "p1", "solar charger works well"},
  };
}

}  // namespace

TEST_CASE("bm25 lexical scoring") {
  const CollectionStats stats = CollectionStats::build(toy_reviews());
  CHECK(stats.review_count == 3);
  CHECK(stats.average_length == Catch::Approx(11.0 / 3.0));
  CHECK(stats.df("solar") == 2);
  CHECK(stats.df("battery") == 1);
  const Bm25Scorer scorer(stats);

  SECTION("no shared vocabulary scores zero") {
    CHECK(scorer.score("warranty period", "solar panel charges quickly") == 0.0);
  }

  SECTION("a self-match is positive") {
    CHECK(scorer.score("battery lasts long", "battery lasts long") > 0.0);
  }

  SECTION("hand-computed value on the toy collection") {
    // idf = ln(1 + (3 - 2 + 0.5) / (2 + 0.5)) = ln(1.6); tf term with tf=1,
    // dl=4: 2.2 / (1 + 1.2*(0.25 + 0.75*4/(11/3))).
    CHECK(scorer.score("solar", "solar panel charges quickly") ==
          Catch::Approx(0.4531509094719841).epsilon(1e-12));
    CHECK(scorer.score("battery", "battery lasts long") ==
          Catch::Approx(1.0596458894144545).epsilon(1e-12));
    // Repeated query terms count once.
    CHECK(scorer.score("solar solar", "solar panel charges quickly") ==
          scorer.score("solar", "solar panel charges quickly"));
  }

  SECTION("empty question is unusable") {
    CHECK_THROWS_AS(scorer.score("?!", "solar panel"), ValidationError);
  }

  SECTION("scores are never negative") {
    oracles::Rng rng(31);
    const std::vector<std::string> words = {"solar",   "panel", "charges",
                                            "quickly", "works", "battery"};
    for (int trial = 0; trial < 100; ++trial) {
      std::string question;
      std::string review;
      for (int i = 0, n = rng.uniform_int(1, 4); i < n; ++i) {
        question += words[rng.uniform_int(0, 5)] + " ";
      }
      for (int i = 0, n = rng.uniform_int(1, 8); i < n; ++i) {
        review += words[rng.uniform_int(0, 5)] + " ";
      }
      CHECK(scorer.score(question, review) >= 0.0);
    }
  }
}

TEST_CASE("score to probability") {
  CHECK(score_to_probability(1.0) == 0.5);
  CHECK(score_to_probability(std::exp(1.0)) ==
        Catch::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(score_to_probability(2.0) == Catch::Approx(2.0 / 3.0));
  CHECK(score_to_probability(1e-12) == Catch::Approx(0.0).margin(1e-11));
  // Non-positive raw scores floor to 0 instead of erroring.
  CHECK(score_to_probability(0.0) == 0.0);
  CHECK(score_to_probability(-3.0) == 0.0);

  SECTION("strictly increasing on positive scores") {
    oracles::Rng rng(32);
    for (int trial = 0; trial < 200; ++trial) {
      const double a = rng.uniform() * 100.0 + 1e-9;
      const double b = a + rng.uniform() * 10.0 + 1e-9;
      CHECK(score_to_probability(a) < score_to_probability(b));
    }
  }

  SECTION("declared-probabilistic scores pass through") {
    CHECK(score_to_probability(0.95, ScoreKind::probability) == 0.95);
    CHECK(score_to_probability(2.0, ScoreKind::raw) == Catch::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(score_to_probability(1.5, ScoreKind::probability),
                    ValidationError);
  }
}

TEST_CASE("external score table") {
  ScoreTable table(ScoreKind::probability);
  table.add("q1", "r1", 0.95);
  CHECK(table.get("q1", "r1").probability == 0.95);
  CHECK_THROWS_AS(table.add("q1", "r1", 0.5), DataError);
  CHECK_THROWS_AS(table.add("q1", "r2", 1.5), ValidationError);
  CHECK_THROWS_AS(table.get("q1", "zz"), DataError);

  ScoreTable raw(ScoreKind::raw);
  raw.add("q1", "r1", 2.0);
  CHECK(raw.get("q1", "r1").raw_score == 2.0);
  CHECK(raw.get("q1", "r1").probability == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("loading a score file") {
  test_support::TempDir dir("selrev-scores");
  const auto path = dir.write(
      "scores.jsonl",
      R"({"score_kind": "probability"})"
      "\n"
      R"({"question_id": "q1", "review_id": "r1", "score": 0.95})"
      "\n"
      R"({"question_id": "q1", "review_id": "r2", "score": 0.10})"
      "\n");
  const ScoreTable table = load_external_scores(path);
  CHECK(table.kind() == ScoreKind::probability);
  CHECK(table.size() == 2);
  CHECK(table.get("q1", "r1").probability == 0.95);

  SECTION("duplicate keys are rejected") {
    const auto dup = dir.write(
        "dup.jsonl",
        R"({"score_kind": "probability"})"
        "\n"
        R"({"question_id": "q1", "review_id": "r1", "score": 0.95})"
        "\n"
        R"({"question_id": "q1", "review_id": "r1", "score": 0.95})"
        "\n");
    CHECK_THROWS_AS(load_external_scores(dup), DataError);
  }

  SECTION("probabilistic scores outside [0,1] are rejected") {
    const auto bad = dir.write(
        "bad.jsonl",
        R"({"score_kind": "probability"})"
        "\n"
        R"({"question_id": "q1", "review_id": "r1", "score": 1.5})"
        "\n");
    CHECK_THROWS_AS(load_external_scores(bad), DataError);
  }

  SECTION("raw kind converts through the sigmoid-of-log map") {
    const auto rawfile = dir.write(
        "raw.jsonl",
        R"({"score_kind": "raw"})"
        "\n"
        R"({"question_id": "q1", "review_id": "r1", "score": 2.0})"
        "\n");
    const ScoreTable raw = load_external_scores(rawfile);
    CHECK(raw.get("q1", "r1").probability == Catch::Approx(2.0 / 3.0));
  }

  SECTION("header is mandatory unless the caller supplies the kind") {
    const auto headerless = dir.write(
        "nohdr.jsonl",
        R"({"question_id": "q1", "review_id": "r1", "score": 0.5})"
        "\n");
    CHECK_THROWS_AS(load_external_scores(headerless), DataError);
    const ScoreTable table2 =
        load_external_scores(headerless, ScoreKind::probability);
    CHECK(table2.size() == 1);
    // A contradicting request is an error.
    CHECK_THROWS_AS(load_external_scores(path, ScoreKind::raw), DataError);
  }
}

TEST_CASE("ranking reviews") {
  const Question question{"q1", "p1", "which stand", {}};
  ScoreTable table(ScoreKind::probability);
  table.add("q1", "r1", 0.9);
  table.add("q1", "r2", 0.5);
  table.add("q1", "r3", 0.7);

  SECTION("sorted descending and cut at depth") {
    const RankedList top2 = rank_reviews(question, {"r1", "r2", "r3"}, table, 2);
    REQUIRE(top2.candidates.size() == 2);
    CHECK(top2.candidates[0].review_id == "r1");
    CHECK(top2.candidates[1].review_id == "r3");
  }

  SECTION("ties break on review id") {
    ScoreTable flat(ScoreKind::probability);
    flat.add("q1", "rb", 0.5);
    flat.add("q1", "ra", 0.5);
    flat.add("q1", "rc", 0.5);
    const RankedList list = rank_reviews(question, {"rb", "ra", "rc"}, flat, 10);
    CHECK(list.candidates[0].review_id == "ra");
    CHECK(list.candidates[1].review_id == "rb");
    CHECK(list.candidates[2].review_id == "rc");
  }

  SECTION("a missing score names the pair") {
    try {
      rank_reviews(question, {"r1", "zz"}, table, 10);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string what = e.what();
      CHECK(what.find("q1") != std::string::npos);
      CHECK(what.find("zz") != std::string::npos);
    }
  }

  SECTION("thirty candidates at depth ten yield exactly ten") {
    ScoreTable wide(ScoreKind::probability);
    std::vector<std::string> ids;
    oracles::Rng rng(33);
    for (int i = 0; i < 30; ++i) {
      const std::string id = "r" + std::to_string(100 + i);
      wide.add("q1", id, rng.uniform());
      ids.push_back(id);
    }
    CHECK(rank_reviews(question, ids, wide, 10).candidates.size() == 10);
  }

  SECTION("deterministic: repeated calls agree exactly") {
    const RankedList a = rank_reviews(question, {"r1", "r2", "r3"}, table, 2);
    const RankedList b = rank_reviews(question, {"r3", "r2", "r1"}, table, 2);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
      CHECK(a.candidates[i].review_id == b.candidates[i].review_id);
      CHECK(a.candidates[i].probability == b.candidates[i].probability);
    }
  }

  SECTION("lexical route orders by the converted probability") {
    const auto reviews = toy_reviews();
    const Bm25Scorer scorer(CollectionStats::build(reviews));
    const Question solar{"qx", "p1", "solar charger", {}};
    const RankedList list = rank_reviews(solar, reviews, scorer, 10);
    REQUIRE(list.candidates.size() == 3);
    CHECK(list.candidates[0].review_id == "r3");  // matches both terms
    CHECK(list.candidates[2].probability == 0.0);  // battery review: no overlap
    for (std::size_t i = 1; i < list.candidates.size(); ++i) {
      CHECK(list.candidates[i - 1].probability >=
            list.candidates[i].probability);
      CHECK(list.candidates[i - 1].raw_score >= list.candidates[i].raw_score);
    }
  }
}
