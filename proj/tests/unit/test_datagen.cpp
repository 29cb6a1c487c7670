#include "catch_amalgamated.hpp"

#include <cmath>

#include "rdimpute/datagen.hpp"
#include "rdimpute/parallel.hpp"

using namespace rdimpute;
using Catch::Approx;

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

// Independent two-pass moments; deliberately not the library helpers.
Moments moments(const std::vector<double>& x) {
  long double s = 0.0L;
  for (double v : x) s += v;
  const double m = static_cast<double>(s / x.size());
  long double ss = 0.0L;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(static_cast<double>(ss / (x.size() - 1)) / x.size())};
}

GenParams noise_free() {
  GenParams p;
  p.sigma_s2 = 0.0;
  p.sigma_e2 = 0.0;
  return p;
}

}  // namespace

TEST_CASE("baseline distribution") {
  GenParams p;
  CHECK(p.mu_x == Approx(8.2857142857).epsilon(1e-10));

  Rng rng(1);
  std::vector<double> x(1'000'000);
  for (auto& v : x) v = draw_baseline(rng, p);
  const Moments m = moments(x);
  CHECK(std::abs(m.mean - 7.0 - 3.0 * 1.5 / 3.5) < 3.0 * m.se);
  for (double v : x) {
    REQUIRE(v >= 7.0);
    REQUIRE(v <= 10.0);
  }

  p.baseline_scale = 0.0;
  for (int i = 0; i < 10; ++i) CHECK(draw_baseline(rng, p) == 7.0);

  p.baseline_beta_a = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("adherent trajectory") {
  SECTION("noise-free saturation") {
    GenParams p = noise_free();
    p.kappa = 50.0;
    Rng rng(2);
    const auto t = adherent_trajectory(rng, 9.0, Arm::control, p);
    for (double y : t.outcomes) CHECK(y == Approx(-0.1 * (9.0 - p.mu_x)).margin(1e-12));
    const auto e = adherent_trajectory(rng, p.mu_x, Arm::experimental, p);
    for (double y : e.outcomes) CHECK(y == Approx(-1.8).margin(1e-12));
  }
  SECTION("week-48 mean") {
    GenParams p;
    for (Arm arm : {Arm::control, Arm::experimental}) {
      Rng rng(3 + arm_index(arm));
      std::vector<double> y48(100'000);
      for (auto& y : y48) y = adherent_trajectory(rng, draw_baseline(rng, p), arm, p).outcomes.back();
      const Moments m = moments(y48);
      const double expected = p.theta[arm_index(arm)] * (1.0 - std::exp(-48.0 * p.kappa));
      CHECK(std::abs(m.mean - expected) < 3.0 * m.se);
    }
  }
}

TEST_CASE("dropout probability arithmetic") {
  GenParams p = preset_params("setting2");
  CHECK(expit(-3.5) == Approx(0.0293122).margin(1e-7));
  CHECK(dropout_probability(0.0, Arm::control, 0, p) == Approx(0.229312).margin(1e-6));
  CHECK(dropout_probability(5.0, Arm::control, 2, p) == Approx(0.229312).margin(1e-6));

  p.dropout_extra[0] = std::vector<double>(4, 1.0 - expit(p.alpha0));
  REQUIRE_NOTHROW(p.validate());
  Rng rng(4);
  const std::vector<double> y{0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 100; ++i) CHECK(simulate_disc_time(rng, y, Arm::control, p) == 0.0);

  p.dropout_extra[0] = std::vector<double>(4, 0.99);
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("per-visit discontinuation hazard under setting2") {
  const GenParams p = preset_params("setting2");
  const VisitGrid& g = p.grid;
  for (Arm arm : {Arm::control, Arm::experimental}) {
    Rng rng(5 + arm_index(arm));
    std::vector<int> at_risk(g.size(), 0), events(g.size(), 0);
    const std::vector<double> y(g.size(), 0.0);
    for (int i = 0; i < 100'000; ++i) {
      const auto ta = simulate_disc_time(rng, y, arm, p);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ++at_risk[k];
        const double tk_minus = k == 0 ? 0.0 : g[k - 1];
        if (ta && *ta == tk_minus) {
          ++events[k];
          break;
        }
      }
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double q = expit(p.alpha0) + p.dropout_extra[arm_index(arm)][k];
      const double freq = static_cast<double>(events[k]) / at_risk[k];
      CHECK(std::abs(freq - q) < 3.0 * std::sqrt(q * (1 - q) / at_risk[k]));
    }
  }
}

TEST_CASE("washout identities") {
  GenParams p = noise_free();
  p.theta = {0.5, -1.8};
  Rng rng(6);
  const auto hyp_c = adherent_trajectory(rng, 8.0, Arm::control, p);
  CHECK(treatment_policy_trajectory(hyp_c.outcomes, Arm::control, 0.0, p) == hyp_c.outcomes);

  const auto hyp = adherent_trajectory(rng, p.mu_x, Arm::experimental, p);
  CHECK(treatment_policy_trajectory(hyp.outcomes, Arm::experimental, std::nullopt, p) == hyp.outcomes);
  CHECK(treatment_policy_trajectory(hyp.outcomes, Arm::experimental, 48.0, p) == hyp.outcomes);

  const auto tp = treatment_policy_trajectory(hyp.outcomes, Arm::experimental, 0.0, p);
  for (std::size_t k = 0; k < p.grid.size(); ++k) {
    const double decay = 1.0 - std::exp(-p.kappa * p.grid[k]);
    const double frac = std::min(p.grid[k], 24.0) / 24.0;
    CHECK(tp[k] == Approx((-1.8 - frac * (-1.8 - 0.5)) * decay).margin(1e-12));
    if (p.grid[k] >= 24.0) CHECK(tp[k] == Approx(0.5 * decay).margin(1e-12));
  }

  GenParams q;
  for (int i = 0; i < 2000; ++i) {
    Rng r(derive_seed(77, {static_cast<std::uint64_t>(i)}));
    const Arm arm = i % 2 ? Arm::experimental : Arm::control;
    const PotentialSubject s = simulate_potential(r, arm, q);
    for (std::size_t k = 0; k < q.grid.size(); ++k) {
      if (arm == Arm::control || !s.disc_time || q.grid[k] <= *s.disc_time) {
        REQUIRE(s.treatment_policy[k] == s.adherent.outcomes[k]);
      }
    }
  }
}

TEST_CASE("administrative withdrawal") {
  GenParams p;
  p.withdrawal_rate = 0.0;
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(simulate_withdrawal(rng, p));

  p.withdrawal_rate = 0.002;
  const double expected = 1.0 - std::exp(-0.096);
  CHECK(expected == Approx(0.09153).epsilon(1e-4));
  int hits = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    if (auto v = simulate_withdrawal(rng, p)) {
      ++hits;
      REQUIRE(*v < 48.0);
    }
  }
  CHECK(std::abs(static_cast<double>(hits) / n - expected) <
        3.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST_CASE("assemble subject") {
  GenParams p;
  const std::vector<double> y{-0.3, -0.6, -0.9, -1.2};
  Rng rng(9);
  const VisitGrid& g = p.grid;

  p.p_miss_completer = 0.0;
  const auto s1 = assemble_subject("1", Arm::control, 8, y, std::nullopt, std::nullopt, rng, p);
  CHECK(classify_scenario(s1, g) == Scenario::s1);
  CHECK(*s1.outcomes.back() == -1.2);

  p.p_miss_retained_dropout = 1.0;
  const auto s4 = assemble_subject("2", Arm::experimental, 8, y, 24.0, std::nullopt, rng, p);
  CHECK(classify_scenario(s4, g) == Scenario::s4_51);
  CHECK(s4.disc_time == 24.0);
  CHECK(s4.outcomes[2].has_value());

  const auto s52 = assemble_subject("3", Arm::control, 8, y, std::nullopt, 30.0, rng, p);
  CHECK(classify_scenario(s52, g) == Scenario::s52);
  CHECK(s52.missing == std::vector<bool>{false, false, true, true});
  CHECK(s52.withdraw_type == WithdrawalType::administrative);

  // discontinuation after the withdrawal date is censored
  const auto cens = assemble_subject("4", Arm::control, 8, y, 36.0, 30.0, rng, p);
  CHECK_FALSE(cens.disc_time);
  CHECK(classify_scenario(cens, g) == Scenario::s52);

  const auto before = assemble_subject("5", Arm::control, 8, y, 12.0, 30.0, rng, p);
  CHECK(before.disc_time == 12.0);
  CHECK(classify_scenario(before, g) == Scenario::s4_51);
}

TEST_CASE("generate_trial") {
  const TrialDataset a = generate_trial("setting1", 123);
  const TrialDataset b = generate_trial("setting1", 123);
  REQUIRE(a.subjects.size() == 400);
  CHECK(validate_dataset(a).empty());
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    CHECK(a.subjects[i].outcomes == b.subjects[i].outcomes);
    CHECK(a.subjects[i].disc_time == b.subjects[i].disc_time);
    CHECK(a.subjects[i].withdraw_time == b.subjects[i].withdraw_time);
  }
  CHECK_THROWS_AS(generate_trial("setting9", 1), ConfigError);

  // Missingness caused by withdrawal is monotone.
  for (const auto& s : a.subjects) {
    if (!s.withdraw_time) continue;
    for (std::size_t k = 0; k < a.grid.size(); ++k) {
      if (a.grid[k] > *s.withdraw_time) CHECK(s.missing[k]);
    }
  }

  GenParams clean;
  clean.withdrawal_rate = 0.0;
  clean.p_miss_completer = 0.0;
  clean.p_miss_retained_dropout = 0.0;
  clean.dropout_extra = {std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)};
  clean.alpha0 = -INFINITY;
  const TrialDataset c = generate_trial(clean, 5);
  for (Scenario s : classify_all(c)) CHECK(s == Scenario::s1);
}

TEST_CASE("truth") {
  GenParams p = noise_free();
  p.baseline_scale = 0.0;
  p.alpha0 = -INFINITY;
  p.dropout_extra = {std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)};
  const TrueValues t = generate_truth(p, 1, 3);
  const double decay = 1.0 - std::exp(-48.0 * p.kappa);
  CHECK(t.mean_control == Approx(-0.1 * (7.0 - p.mu_x) * decay).margin(1e-12));
  CHECK(t.mean_treatment == Approx((-1.8 + 0.1 * (7.0 - p.mu_x)) * decay).margin(1e-12));
  CHECK(t.n_datasets == 1);

  const GenParams d;
  const TrueValues one = generate_truth(d, 200, 17, 1);
  const TrueValues four = generate_truth(d, 200, 17, 4);
  CHECK(one.mean_control == four.mean_control);
  CHECK(one.mean_treatment == four.mean_treatment);
  CHECK(one.difference == four.difference);
  CHECK(one.difference == Approx(one.mean_treatment - one.mean_control).margin(1e-12));
  CHECK(std::abs(one.mean_control) < 0.05);
}
