#pragma once

#include <limits>
#include <span>

#include "rdimpute/imputation.hpp"

namespace rdimpute {

/// Unadjusted arm means of the endpoint with variance-of-mean s^2 / n.
struct CompleteEstimate {
  double mean_control = 0.0;
  double mean_treatment = 0.0;
  double diff = 0.0;
  double var_control = 0.0;
  double var_treatment = 0.0;
  double var_diff = 0.0;
  int n_control = 0;
  int n_treatment = 0;
};

/// Throws std::invalid_argument when an arm is empty or an endpoint is missing.
CompleteEstimate estimate_complete(const CompletedDataset& data);
CompleteEstimate estimate_complete(std::span<const Arm> arms, std::span<const double> endpoint);

struct PointVariance {
  double point = 0.0;
  double variance = 0.0;
};

/// Rubin's rules with the Barnard-Rubin degrees of freedom.
struct PooledEstimate {
  double point = 0.0;
  double within = 0.0;
  double between = 0.0;
  double total = 0.0;
  /// Infinite when both B = 0 and the complete-data df is infinite.
  double df = std::numeric_limits<double>::infinity();
  double level = 0.95;
  double lower = 0.0;
  double upper = 0.0;
  int m = 0;

  double se() const;
};

/// `complete_df` is the complete-data degrees of freedom (infinity for the classic Rubin df).
/// Throws std::invalid_argument for fewer than two estimates or non-finite inputs.
PooledEstimate pool_rubin(std::span<const PointVariance> estimates, double level = 0.95,
                          double complete_df = std::numeric_limits<double>::infinity());

/// Closed interval check.
bool coverage_indicator(const PooledEstimate& pooled, double truth) noexcept;

/// Two-sided Student-t (normal when df is infinite) critical value.
double t_critical(double df, double level);

/// Pooled control mean, treatment mean and difference for one imputation run.
struct PooledTriple {
  PooledEstimate control;
  PooledEstimate treatment;
  PooledEstimate difference;
};

/// Complete-data df: n - 1 for an arm mean, n0 + n1 - 2 for the difference.
PooledTriple pool_completed(std::span<const CompletedDataset> completed, double level = 0.95);

}  // namespace rdimpute
