#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "rdimpute/model.hpp"

namespace rdimpute {

class SurvivalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time to NRWL treatment discontinuation, right-censored at withdrawal or study end.
struct SurvivalObservation {
  double time = 0.0;
  bool event = false;
  std::vector<double> covariates;
};

enum class SurvivalKind { proportional_hazards, covariate_free };

/// Fitted survival function S(t | x) for one arm.
///
/// Baseline hazard increments are Breslow's, evaluated at the covariate means; the survival
/// curve is the product-limit of those increments raised to exp(beta'(x - mean)), so with
/// beta = 0 it coincides with Kaplan-Meier. The curve is right-continuous: an event at time t
/// is already counted in S(t).
struct SurvivalModel {
  SurvivalKind kind = SurvivalKind::covariate_free;
  std::vector<double> coefficients;
  std::vector<double> covariate_means;
  std::vector<double> event_times;
  std::vector<double> hazard_increments;
  double log_likelihood = 0.0;
  int iterations = 0;
  /// Proportional hazards was requested but the likelihood was monotone; Kaplan-Meier used.
  bool fell_back = false;

  double cumulative_baseline_hazard(double t) const;
};

struct SurvivalFitOptions {
  int max_iterations = 50;
  double loglik_tolerance = 1e-10;
  /// |beta_k| * sd(x_k) above this is treated as separation.
  double separation_bound = 20.0;
};

/// Throws SurvivalError("degenerate survival fit") without events and on non-convergence.
SurvivalModel fit_survival(std::span<const SurvivalObservation> sample, SurvivalKind kind,
                           const SurvivalFitOptions& options = {});

double conditional_survival(const SurvivalModel& model, double t, std::span<const double> x);

/// (S(v) - S(d)) / S(v), clamped to [0, 1].
double conditional_disc_probability(double survival_at_withdrawal, double survival_at_end);

/// Probability of NRWL discontinuation in (v, d] given none by v.
double prob_disc_before_end(const SurvivalModel& model, double v, double d,
                            std::span<const double> x);

/// Breslow partial log-likelihood on the raw covariates.
double cox_partial_loglik(std::span<const SurvivalObservation> sample,
                          std::span<const double> beta);

/// Analytic gradient of cox_partial_loglik.
std::vector<double> cox_score(std::span<const SurvivalObservation> sample,
                              std::span<const double> beta);

/// Per-arm sample: events at U (or at V for non-administrative withdrawals without U),
/// censoring at d for adherers and at V for administrative withdrawals. Covariate: baseline.
std::vector<SurvivalObservation> build_survival_sample(const TrialDataset& data,
                                                       std::span<const Scenario> scenarios,
                                                       Arm arm);

}  // namespace rdimpute
