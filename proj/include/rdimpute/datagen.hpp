#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rdimpute/model.hpp"
#include "rdimpute/random.hpp"

namespace rdimpute {

/// Constants of the generative model. Defaults are the paper's common values with
/// Setting 1 dropout/withdrawal; the unpublished theta_1 and kappa are calibration knobs.
struct GenParams {
  int n_per_arm = 200;
  /// Ultimate change per arm, indexed by arm.
  std::array<double, 2> theta{0.0, -1.8};
  double beta0 = -0.1;
  double beta1 = 0.2;
  double baseline_beta_a = 1.5;
  double baseline_beta_b = 2.0;
  double baseline_loc = 7.0;
  double baseline_scale = 3.0;
  double mu_x = 7.0 + 3.0 * 1.5 / 3.5;
  double kappa = 0.06;
  double sigma_s2 = 1.0;
  double sigma_e2 = 0.5;
  double alpha0 = -3.5;
  double alpha1 = 1.5;
  /// Additive per-visit dropout probability c_k, indexed [arm][visit].
  std::array<std::vector<double>, 2> dropout_extra{
      std::vector<double>{0.2, 0.2, 0.2, 0.2}, std::vector<double>{0.06, 0.06, 0.03, 0.02}};
  double withdrawal_rate = 0.002;
  double washout_weeks = 24.0;
  double p_miss_completer = 0.05;
  double p_miss_retained_dropout = 0.8;
  VisitGrid grid;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

/// "setting1" or "setting2". Throws ConfigError otherwise.
GenParams preset_params(std::string_view name);

double expit(double x) noexcept;

/// Location-scaled Beta draw for the baseline value.
double draw_baseline(Rng& rng, const GenParams& p);

struct AdherentTrajectory {
  double random_effect = 0.0;
  /// Potential outcome under adherence, one per visit.
  std::vector<double> outcomes;
};

AdherentTrajectory adherent_trajectory(Rng& rng, double baseline, Arm arm, const GenParams& p);

/// Probability of stopping treatment right after visit k-1, given the outcome there
/// (0 at baseline). Values above 1 produced by extreme outcomes are capped at 1.
double dropout_probability(double previous_outcome, Arm arm, std::size_t k, const GenParams& p);

/// Time of NRWL discontinuation (a grid week or 0), or nullopt when the subject adheres throughout.
std::optional<double> simulate_disc_time(Rng& rng, std::span<const double> adherent, Arm arm,
                                         const GenParams& p);

/// Adds the linear washout of the arm effect after discontinuation. Error terms are shared
/// with the adherent trajectory.
std::vector<double> treatment_policy_trajectory(std::span<const double> adherent, Arm arm,
                                                std::optional<double> disc_time,
                                                const GenParams& p);

/// Administrative withdrawal time, or nullopt when it falls at or beyond the study end.
std::optional<double> simulate_withdrawal(Rng& rng, const GenParams& p);

/// Applies withdrawal masking and the endpoint missingness of completers and retained dropouts.
SubjectRecord assemble_subject(std::string id, Arm arm, double baseline,
                               std::span<const double> treatment_policy,
                               std::optional<double> disc_time,
                               std::optional<double> withdraw_time, Rng& rng,
                               const GenParams& p);

/// One subject's full potential data before any missingness.
struct PotentialSubject {
  Arm arm = Arm::control;
  double baseline = 0.0;
  AdherentTrajectory adherent;
  std::optional<double> disc_time;
  std::vector<double> treatment_policy;
};

PotentialSubject simulate_potential(Rng& rng, Arm arm, const GenParams& p);

/// 2 * n_per_arm subjects (control first). Subject j draws from its own stream of `seed`.
TrialDataset generate_trial(const GenParams& p, std::uint64_t seed);
TrialDataset generate_trial(std::string_view preset, std::uint64_t seed);

struct TrueValues {
  double mean_control = 0.0;
  double mean_treatment = 0.0;
  double difference = 0.0;
  int n_datasets = 0;
};

/// Averages complete-data endpoint means over n_datasets simulated trials without missingness.
TrueValues generate_truth(const GenParams& p, int n_datasets, std::uint64_t seed, int workers = 1);

}  // namespace rdimpute
