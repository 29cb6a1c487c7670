#include "catch_amalgamated.hpp"

#include <random>

#include "rdimpute/datagen.hpp"
#include "rdimpute/model.hpp"

using namespace rdimpute;

namespace {

using Outcomes = std::vector<std::optional<double>>;
const Outcomes kFull{0.1, 0.2, 0.3, 0.4};
const Outcomes kNoEnd{0.1, 0.2, 0.3, std::nullopt};

}  // namespace

TEST_CASE("classify: textbook cases") {
  const VisitGrid g;
  CHECK(classify_scenario(make_subject("a", Arm::control, 8, kFull), g) == Scenario::s1);
  CHECK(classify_scenario(make_subject("b", Arm::control, 8, kFull, 24.0), g) == Scenario::s3);
  CHECK(classify_scenario(make_subject("c", Arm::control, 8, {0.1, 0.2, std::nullopt, std::nullopt},
                                       std::nullopt, 24.0, WithdrawalType::administrative),
                          g) == Scenario::s52);
  CHECK(classify_scenario(make_subject("d", Arm::control, 8, {0.1, 0.2, std::nullopt, std::nullopt},
                                       std::nullopt, 24.0, WithdrawalType::other),
                          g) == Scenario::s4_51);
}

TEST_CASE("classify: remaining branches") {
  const VisitGrid g;
  // missing endpoint, no U, no V: logistic missingness
  CHECK(classify_scenario(make_subject("a", Arm::control, 8, kNoEnd), g) == Scenario::s2);
  // discontinued, stayed in study, endpoint missing
  CHECK(classify_scenario(make_subject("b", Arm::control, 8, kNoEnd, 12.0), g) == Scenario::s4_51);
  // discontinued before an administrative withdrawal
  CHECK(classify_scenario(make_subject("c", Arm::experimental, 8, {0.1, std::nullopt, std::nullopt, std::nullopt},
                                       0.0, 20.0, WithdrawalType::administrative),
                          g) == Scenario::s4_51);
  // discontinuation on the withdrawal date counts as censored by it
  CHECK(classify_scenario(make_subject("d", Arm::experimental, 8, {0.1, 0.2, std::nullopt, std::nullopt},
                                       30.0, 30.0, WithdrawalType::administrative),
                          g) == Scenario::s52);
  // U >= d behaves as no discontinuation
  CHECK(classify_scenario(make_subject("e", Arm::control, 8, kFull, 48.0), g) == Scenario::s1);
}

TEST_CASE("classify: inconsistent records throw") {
  const VisitGrid g;
  auto s = make_subject("x", Arm::control, 8, kNoEnd, std::nullopt, std::nullopt,
                        WithdrawalType::administrative);
  CHECK_THROWS_AS(classify_scenario(s, g), ValidationError);
  auto late = make_subject("y", Arm::control, 8, kFull, std::nullopt, 30.0, WithdrawalType::administrative);
  CHECK_THROWS_AS(classify_scenario(late, g), ValidationError);
}

TEST_CASE("validate_dataset reports") {
  TrialDataset good = generate_trial("setting1", 11);
  CHECK(validate_dataset(good).empty());

  TrialDataset bad = good;
  bad.subjects[3].withdraw_time.reset();
  bad.subjects[3].withdraw_type = WithdrawalType::administrative;
  CHECK(validate_dataset(bad).size() == 1);

  TrialDataset flag = good;
  for (auto& s : flag.subjects) {
    if (s.endpoint_observed()) {
      s.missing.back() = true;
      break;
    }
  }
  const auto report = validate_dataset(flag);
  REQUIRE(report.size() == 1);
  CHECK(report[0].subject_index < flag.subjects.size());

  TrialDataset dup = good;
  dup.subjects[1].id = dup.subjects[0].id;
  CHECK_FALSE(validate_dataset(dup).empty());
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(VisitGrid({12, 12, 24}), ConfigError);
  CHECK_THROWS_AS(VisitGrid(std::vector<double>{}), ConfigError);
  CHECK_THROWS_AS(VisitGrid({-1, 12}), ConfigError);
  CHECK(VisitGrid({4, 52}).duration() == 52);
}

TEST_CASE("random records: valid ones get exactly one label, independent of values") {
  const VisitGrid g;
  std::mt19937_64 eng(20240601);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<int, kScenarioCount> seen{};
  int valid = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    Outcomes y(4);
    for (auto& v : y) {
      if (unif(eng) < 0.7) v = unif(eng);
    }
    std::optional<double> u, v;
    std::optional<WithdrawalType> d;
    if (unif(eng) < 0.5) u = g[static_cast<std::size_t>(unif(eng) * 4)] * (unif(eng) < 0.2 ? 0.0 : 1.0);
    if (unif(eng) < 0.5) v = unif(eng) * 48.0;
    if (unif(eng) < 0.5) d = unif(eng) < 0.5 ? WithdrawalType::administrative : WithdrawalType::other;
    const auto s = make_subject(std::to_string(trial), Arm::control, 8, y, u, v, d);
    if (!subject_violations(s, g).empty()) {
      CHECK_THROWS_AS(classify_scenario(s, g), ValidationError);
      continue;
    }
    ++valid;
    const Scenario label = classify_scenario(s, g);
    ++seen[static_cast<int>(label)];
    auto shifted = s;
    for (auto& o : shifted.outcomes) {
      if (o) *o = -100.0 * *o;
    }
    CHECK(classify_scenario(shifted, g) == label);
  }
  CHECK(valid > 1000);
  for (int k = 0; k < kScenarioCount; ++k) CHECK(seen[k] > 0);
}
