#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "oracles.hpp"
#include "selrev/conformal.hpp"
#include "selrev/synthetic.hpp"

using namespace selrev;

TEST_CASE("nonconformity") {
  CHECK(nonconformity(0.99, Label::relevant) == Catch::Approx(-0.99));
  CHECK(nonconformity(0.99, Label::irrelevant) == Catch::Approx(-0.01));
  CHECK(nonconformity(0.5, Label::relevant) == -0.5);
  CHECK(nonconformity(0.5, Label::irrelevant) == -0.5);
  CHECK_THROWS_AS(nonconformity(1.5, Label::relevant), ValidationError);
  CHECK_THROWS_AS(nonconformity(-0.1, Label::irrelevant), ValidationError);
}

TEST_CASE("calibrate splits scores by class") {
  const CalibrationSet cal = calibrate(
      {{0.9, true}, {0.8, true}, {0.3, false}});
  CHECK(cal.count(Label::relevant) == 2);
  CHECK(cal.count(Label::irrelevant) == 1);
  CHECK(cal.scores(Label::relevant) == std::vector<double>{-0.9, -0.8});
  CHECK(cal.scores(Label::irrelevant) == std::vector<double>{-0.7});

  const CalibrationSet empty = calibrate({});
  CHECK(empty.count(Label::relevant) == 0);
  CHECK(empty.count(Label::irrelevant) == 0);
}

TEST_CASE("calibrate matches a brute-force recount on random input") {
  oracles::Rng rng(11);
  std::vector<LabeledProbability> pairs;
  std::vector<double> expected_relevant;
  std::vector<double> expected_irrelevant;
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform();
    const bool relevant = rng.uniform() < 0.4;
    pairs.push_back({p, relevant});
    (relevant ? expected_relevant : expected_irrelevant)
        .push_back(relevant ? -p : -(1.0 - p));
  }
  std::sort(expected_relevant.begin(), expected_relevant.end());
  std::sort(expected_irrelevant.begin(), expected_irrelevant.end());
  const CalibrationSet cal = calibrate(pairs);
  CHECK(cal.scores(Label::relevant) == expected_relevant);
  CHECK(cal.scores(Label::irrelevant) == expected_irrelevant);
}

TEST_CASE("p-value counting") {
  CalibrationSet cal = calibrate({{0.9, true}, {0.8, true}, {0.7, true}});
  // class-1 scores {-0.9,-0.8,-0.7}; candidate alpha -0.6 beats none.
  CHECK(p_value(cal, -0.6, Label::relevant) == Catch::Approx(0.25));
  // empty class-0 calibration is vacuous.
  CHECK(p_value(cal, -0.2, Label::irrelevant) == 1.0);

  CalibrationSet two = calibrate({{0.9, true}, {0.8, true}});
  // exact tie counts via >=.
  CHECK(p_value(two, -0.8, Label::relevant) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("p-values match the counting oracle on random calibration sets") {
  oracles::Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(0, 60);
    std::vector<LabeledProbability> pairs;
    for (int i = 0; i < n; ++i) {
      // Coarse grid so exact ties actually happen.
      const double p = rng.uniform_int(0, 20) / 20.0;
      pairs.push_back({p, rng.uniform() < 0.5});
    }
    const CalibrationSet cal = calibrate(pairs);
    const double probability = rng.uniform_int(0, 20) / 20.0;
    for (Label label : {Label::relevant, Label::irrelevant}) {
      const double alpha = nonconformity(probability, label);
      std::vector<double> class_scores;
      for (const auto& pair : pairs) {
        if (pair.relevant == (label == Label::relevant)) {
          class_scores.push_back(nonconformity(
              pair.probability, pair.relevant ? Label::relevant
                                              : Label::irrelevant));
        }
      }
      REQUIRE(p_value(cal, alpha, label) ==
              oracles::p_value(class_scores, alpha));
    }
  }
}

TEST_CASE("pooled escape hatch counts across both classes") {
  const CalibrationSet cal =
      calibrate({{0.9, true}, {0.8, true}, {0.3, false}});
  // stored scores: {-0.9, -0.8} (class 1) and {-0.7} (class 0)
  const double alpha = nonconformity(0.85, Label::relevant);  // -0.85
  CHECK(p_value(cal, alpha, Label::relevant, PValueMode::pooled) ==
        Catch::Approx(3.0 / 4.0));
  CHECK(p_value(cal, alpha, Label::relevant, PValueMode::mondrian) ==
        Catch::Approx(2.0 / 3.0));
}

TEST_CASE("prediction regions at the worked significance levels") {
  const PValuePair p{0.65, 0.45};

  const PredictionRegion loose = prediction_region(p, 0.05);
  CHECK(loose.contains_relevant);
  CHECK(loose.contains_irrelevant);
  CHECK(accept(loose) == Decision::rejected);

  const PredictionRegion mid = prediction_region(p, 0.45);
  CHECK(mid.contains_relevant);
  CHECK_FALSE(mid.contains_irrelevant);
  CHECK(accept(mid) == Decision::accepted);

  const PredictionRegion strict = prediction_region(p, 0.75);
  CHECK(strict.empty());
  CHECK(accept(strict) == Decision::rejected);

  CHECK_THROWS_AS(prediction_region(p, 1.5), ValidationError);
}

TEST_CASE("region nesting in epsilon") {
  oracles::Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const PValuePair p{rng.uniform(), rng.uniform()};
    const double e1 = rng.uniform();
    const double e2 = rng.uniform();
    const double lo = std::min(e1, e2);
    const double hi = std::max(e1, e2);
    const PredictionRegion wide = prediction_region(p, lo);
    const PredictionRegion narrow = prediction_region(p, hi);
    if (narrow.contains_relevant) CHECK(wide.contains_relevant);
    if (narrow.contains_irrelevant) CHECK(wide.contains_irrelevant);
  }
}

namespace {

RankedList make_list(const std::vector<double>& probabilities) {
  RankedList list{"q", 10, {}};
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    list.candidates.push_back(
        {"q", "r" + std::to_string(i), probabilities[i], probabilities[i]});
  }
  std::sort(list.candidates.begin(), list.candidates.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              return a.probability > b.probability;
            });
  return list;
}

}  // namespace

TEST_CASE("filter keeps only the confidently relevant prefix") {
  // Calibration chosen so the candidates 0.99/0.95/0.91 get positive-label
  // p-values 0.82/0.54/0.40: of 49 relevant calibration probabilities, 9
  // exceed 0.99, 23 exceed 0.95 and 30 exceed 0.91.
  std::vector<LabeledProbability> pairs;
  for (int i = 0; i < 19; ++i) pairs.push_back({0.50, true});
  for (int i = 0; i < 7; ++i) pairs.push_back({0.93, true});
  for (int i = 0; i < 14; ++i) pairs.push_back({0.97, true});
  for (int i = 0; i < 9; ++i) pairs.push_back({0.995, true});
  for (int i = 0; i < 30; ++i) pairs.push_back({0.10, false});
  const CalibrationSet cal = calibrate(pairs);

  const RankedList list = make_list({0.99, 0.95, 0.91});
  const auto pv = [&](double prob) { return p_values(cal, prob); };
  CHECK(pv(0.99).p_relevant == Catch::Approx(0.82));
  CHECK(pv(0.95).p_relevant == Catch::Approx(0.54));
  CHECK(pv(0.91).p_relevant == Catch::Approx(0.40));

  const RankedList kept = filter_ranked_list(list, cal, 0.60);
  REQUIRE(kept.candidates.size() == 1);
  CHECK(kept.candidates[0].probability == 0.99);

  // At epsilon = 1 no p-value can exceed the bar: the unanswerable verdict.
  CHECK(filter_ranked_list(list, cal, 1.0).candidates.empty());
}

TEST_CASE("filter agrees with a per-candidate accept sweep") {
  oracles::Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabeledProbability> pairs;
    const int n = rng.uniform_int(2, 80);
    for (int i = 0; i < n; ++i) {
      pairs.push_back({rng.uniform(), rng.uniform() < 0.5});
    }
    const CalibrationSet cal = calibrate(pairs);
    std::vector<double> probs;
    for (int i = 0, m = rng.uniform_int(0, 10); i < m; ++i) {
      probs.push_back(rng.uniform());
    }
    const RankedList list = make_list(probs);
    const double epsilon = rng.uniform();
    const RankedList kept = filter_ranked_list(list, cal, epsilon);

    std::vector<ScoredCandidate> expected;
    for (const auto& c : list.candidates) {
      const auto region =
          prediction_region(p_values(cal, c.probability), epsilon);
      if (accept(region) == Decision::accepted) expected.push_back(c);
    }
    REQUIRE(kept.candidates.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(kept.candidates[i].review_id == expected[i].review_id);
    }
  }
}

TEST_CASE("positive-label p-values are monotone in the probability") {
  oracles::Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabeledProbability> pairs;
    const int n = rng.uniform_int(2, 60);
    for (int i = 0; i < n; ++i) {
      pairs.push_back({rng.uniform(), rng.uniform() < 0.4});
    }
    const CalibrationSet cal = calibrate(pairs);

    std::vector<double> probs;
    for (int i = 0, m = rng.uniform_int(2, 12); i < m; ++i) {
      probs.push_back(rng.uniform());
    }
    std::sort(probs.begin(), probs.end(), std::greater<double>());
    double last_p1 = 2.0;
    double last_p0 = -1.0;
    for (double prob : probs) {
      const PValuePair pv = p_values(cal, prob);
      CHECK(pv.p_relevant <= last_p1 + 1e-15);
      CHECK(pv.p_irrelevant >= last_p0 - 1e-15);
      last_p1 = pv.p_relevant;
      last_p0 = pv.p_irrelevant;
    }
  }
}

TEST_CASE("coverage on exchangeable data") {
  // Smaller, faster cousin of the acceptance run.
  ValidityConfig config;
  config.test_points = 4000;
  config.calibration_points = 1500;
  const auto rows = validate_conformal(config, 99, {0.05, 0.1, 0.2, 0.3});
  for (const auto& row : rows) {
    INFO("epsilon " << row.epsilon);
    CHECK(row.pass);
  }
}

TEST_CASE("true-label p-values are dominated by the uniform CDF") {
  ValidityConfig config;
  config.test_points = 4000;
  config.calibration_points = 1500;
  const auto rows = validate_conformal(
      config, 123, {0.02, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9});
  for (const auto& row : rows) {
    INFO("t = " << row.epsilon);
    CHECK(row.miscoverage <= row.bound);
  }
}

TEST_CASE("shifted test distribution breaks coverage") {
  ValidityConfig config;
  config.test_points = 4000;
  config.calibration_points = 1500;
  config.positive_rate = 0.5;
  config.shift = 0.5;
  const auto rows = validate_conformal(config, 7, {0.05, 0.1});
  bool any_fail = false;
  for (const auto& row : rows) any_fail = any_fail || !row.pass;
  CHECK(any_fail);
}
