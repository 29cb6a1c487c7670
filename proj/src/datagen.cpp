#include "rdimpute/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rdimpute/parallel.hpp"

namespace rdimpute {

namespace {

double gauss(Rng& rng, double variance) {
  return variance > 0.0 ? rng.normal(0.0, std::sqrt(variance)) : 0.0;
}

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("invalid generation parameter: ") + what);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void GenParams::validate() const {
  require(n_per_arm >= 1, "n_per_arm must be >= 1");
  require(std::isfinite(theta[0]) && std::isfinite(theta[1]), "theta must be finite");
  require(std::isfinite(beta0) && std::isfinite(beta1), "beta0/beta1 must be finite");
  require(baseline_beta_a > 0.0 && baseline_beta_b > 0.0, "baseline Beta shapes must be > 0");
  require(std::isfinite(baseline_loc), "baseline_loc must be finite");
  require(baseline_scale >= 0.0 && std::isfinite(baseline_scale), "baseline_scale must be >= 0");
  require(std::isfinite(mu_x), "mu_x must be finite");
  require(kappa > 0.0 && std::isfinite(kappa), "kappa must be > 0");
  require(sigma_s2 >= 0.0 && std::isfinite(sigma_s2), "sigma_s2 must be >= 0");
  require(sigma_e2 >= 0.0 && std::isfinite(sigma_e2), "sigma_e2 must be >= 0");
  require(!std::isnan(alpha0) && alpha0 < INFINITY, "alpha0 must be < +inf");
  require(std::isfinite(alpha1), "alpha1 must be finite");
  require(withdrawal_rate >= 0.0 && std::isfinite(withdrawal_rate), "withdrawal_rate must be >= 0");
  require(washout_weeks > 0.0, "washout_weeks must be > 0");
  require(is_probability(p_miss_completer), "p_miss_completer must be in [0, 1]");
  require(is_probability(p_miss_retained_dropout), "p_miss_retained_dropout must be in [0, 1]");
  for (const auto& c : dropout_extra) {
    require(c.size() == grid.size(), "dropout_extra needs one value per visit");
    for (double v : c) {
      require(v >= 0.0 && v < 1.0, "dropout_extra values must be in [0, 1)");
      // Checked at the week-0 outcome; larger outcomes are capped at generation.
      require(expit(alpha0) + v <= 1.0 + 1e-12, "expit(alpha0) + dropout_extra exceeds 1");
    }
  }
}

GenParams preset_params(std::string_view name) {
  GenParams p;
  if (name == "setting1") {
    p.alpha0 = -3.5;
    p.alpha1 = 1.5;
    p.withdrawal_rate = 0.002;
  } else if (name == "setting2") {
    p.alpha0 = -3.5;
    p.alpha1 = 0.0;
    p.withdrawal_rate = 0.005;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected setting1 or setting2)");
  }
  return p;
}

double expit(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double draw_baseline(Rng& rng, const GenParams& p) {
  if (!(p.baseline_beta_a > 0.0 && p.baseline_beta_b > 0.0)) {
    throw ConfigError("invalid generation parameter: baseline Beta shapes must be > 0");
  }
  const double ga = std::gamma_distribution<double>(p.baseline_beta_a, 1.0)(rng);
  const double gb = std::gamma_distribution<double>(p.baseline_beta_b, 1.0)(rng);
  return p.baseline_loc + p.baseline_scale * (ga / (ga + gb));
}

AdherentTrajectory adherent_trajectory(Rng& rng, double baseline, Arm arm, const GenParams& p) {
  const int z = arm_index(arm);
  AdherentTrajectory out;
  out.random_effect = gauss(rng, p.sigma_s2);
  const double level =
      p.theta[z] + (p.beta0 + z * p.beta1) * (baseline - p.mu_x) + out.random_effect;
  out.outcomes.reserve(p.grid.size());
  for (double t : p.grid.weeks()) {
    out.outcomes.push_back(level * (1.0 - std::exp(-p.kappa * t)) + gauss(rng, p.sigma_e2));
  }
  return out;
}

double dropout_probability(double previous_outcome, Arm arm, std::size_t k, const GenParams& p) {
  const double prob =
      expit(p.alpha0 + p.alpha1 * previous_outcome) + p.dropout_extra[arm_index(arm)].at(k);
  return std::min(prob, 1.0);
}

std::optional<double> simulate_disc_time(Rng& rng, std::span<const double> adherent, Arm arm,
                                         const GenParams& p) {
  for (std::size_t k = 0; k < p.grid.size(); ++k) {
    const double previous = k == 0 ? 0.0 : adherent[k - 1];
    if (rng.uniform() < dropout_probability(previous, arm, k, p)) {
      return k == 0 ? 0.0 : p.grid[k - 1];
    }
  }
  return std::nullopt;
}

std::vector<double> treatment_policy_trajectory(std::span<const double> adherent, Arm arm,
                                                std::optional<double> disc_time,
                                                const GenParams& p) {
  std::vector<double> out(adherent.begin(), adherent.end());
  if (!disc_time) return out;
  const double effect = p.theta[arm_index(arm)] - p.theta[0];
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double t = p.grid[k];
    const double off = std::min(std::max(t - *disc_time, 0.0), p.washout_weeks) / p.washout_weeks;
    out[k] += -effect * off * (1.0 - std::exp(-p.kappa * t));
  }
  return out;
}

std::optional<double> simulate_withdrawal(Rng& rng, const GenParams& p) {
  const double u = rng.uniform();
  if (p.withdrawal_rate <= 0.0) return std::nullopt;
  const double w = -std::log1p(-u) / p.withdrawal_rate;
  if (w < p.grid.duration()) return w;
  return std::nullopt;
}

SubjectRecord assemble_subject(std::string id, Arm arm, double baseline,
                               std::span<const double> treatment_policy,
                               std::optional<double> disc_time,
                               std::optional<double> withdraw_time, Rng& rng,
                               const GenParams& p) {
  const std::size_t kk = p.grid.size();
  std::vector<std::optional<double>> y(treatment_policy.begin(), treatment_policy.end());
  const double u = rng.uniform();

  std::optional<double> recorded_disc;
  std::optional<WithdrawalType> type;
  if (withdraw_time) {
    type = WithdrawalType::administrative;
    for (std::size_t k = 0; k < kk; ++k) {
      if (p.grid[k] > *withdraw_time) y[k].reset();
    }
    if (disc_time && *disc_time < *withdraw_time) recorded_disc = disc_time;
  } else if (disc_time) {
    recorded_disc = disc_time;
    if (u < p.p_miss_retained_dropout) y[kk - 1].reset();
  } else if (u < p.p_miss_completer) {
    y[kk - 1].reset();
  }
  return make_subject(std::move(id), arm, baseline, std::move(y), recorded_disc, withdraw_time,
                      type);
}

PotentialSubject simulate_potential(Rng& rng, Arm arm, const GenParams& p) {
  PotentialSubject s;
  s.arm = arm;
  s.baseline = draw_baseline(rng, p);
  s.adherent = adherent_trajectory(rng, s.baseline, arm, p);
  s.disc_time = simulate_disc_time(rng, s.adherent.outcomes, arm, p);
  s.treatment_policy = treatment_policy_trajectory(s.adherent.outcomes, arm, s.disc_time, p);
  return s;
}

namespace {

Arm arm_of(int j, int n_per_arm) { return j < n_per_arm ? Arm::control : Arm::experimental; }

}  // namespace

TrialDataset generate_trial(const GenParams& p, std::uint64_t seed) {
  p.validate();
  TrialDataset data;
  data.grid = p.grid;
  const int n = 2 * p.n_per_arm;
  data.subjects.reserve(n);
  for (int j = 0; j < n; ++j) {
    Rng rng(derive_seed(seed, {stream_tag::kSubject, static_cast<std::uint64_t>(j)}));
    const PotentialSubject s = simulate_potential(rng, arm_of(j, p.n_per_arm), p);
    const auto v = simulate_withdrawal(rng, p);
    data.subjects.push_back(assemble_subject(std::to_string(j + 1), s.arm, s.baseline,
                                             s.treatment_policy, s.disc_time, v, rng, p));
  }
  std::ostringstream prov;
  prov << "generated seed=" << seed;
  data.provenance = prov.str();
  return data;
}

TrialDataset generate_trial(std::string_view preset, std::uint64_t seed) {
  return generate_trial(preset_params(preset), seed);
}

TrueValues generate_truth(const GenParams& p, int n_datasets, std::uint64_t seed, int workers) {
  p.validate();
  if (n_datasets < 1) throw ConfigError("truth requires at least one dataset");
  std::vector<double> control(n_datasets), treatment(n_datasets), diff(n_datasets);
  parallel_for(static_cast<std::size_t>(n_datasets), workers, [&](std::size_t i) {
    const std::uint64_t ds_seed = derive_seed(seed, {stream_tag::kTruth, i});
    std::array<std::vector<double>, 2> endpoint;
    for (auto& e : endpoint) e.reserve(p.n_per_arm);
    for (int j = 0; j < 2 * p.n_per_arm; ++j) {
      Rng rng(derive_seed(ds_seed, {stream_tag::kSubject, static_cast<std::uint64_t>(j)}));
      const PotentialSubject s = simulate_potential(rng, arm_of(j, p.n_per_arm), p);
      endpoint[arm_index(s.arm)].push_back(s.treatment_policy.back());
    }
    control[i] = mean(endpoint[0]);
    treatment[i] = mean(endpoint[1]);
    diff[i] = treatment[i] - control[i];
  });
  return {mean(control), mean(treatment), mean(diff), n_datasets};
}

}  // namespace rdimpute
