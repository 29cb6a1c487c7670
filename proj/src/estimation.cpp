#include "rdimpute/estimation.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdimpute/parallel.hpp"

namespace rdimpute {

CompleteEstimate estimate_complete(std::span<const Arm> arms, std::span<const double> endpoint) {
  if (arms.size() != endpoint.size()) throw std::invalid_argument("arms/endpoint size mismatch");
  std::vector<double> values[2];
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (std::isnan(endpoint[i])) throw std::invalid_argument("endpoint missing in completed data");
    values[arm_index(arms[i])].push_back(endpoint[i]);
  }
  if (values[0].empty() || values[1].empty()) throw std::invalid_argument("empty arm");
  CompleteEstimate e;
  e.n_control = static_cast<int>(values[0].size());
  e.n_treatment = static_cast<int>(values[1].size());
  e.mean_control = mean(values[0]);
  e.mean_treatment = mean(values[1]);
  e.diff = e.mean_treatment - e.mean_control;
  e.var_control = sample_variance(values[0]) / e.n_control;
  e.var_treatment = sample_variance(values[1]) / e.n_treatment;
  e.var_diff = e.var_control + e.var_treatment;
  return e;
}

CompleteEstimate estimate_complete(const CompletedDataset& data) {
  std::vector<Arm> arms;
  arms.reserve(data.source->subjects.size());
  for (const auto& s : data.source->subjects) arms.push_back(s.arm);
  return estimate_complete(arms, data.endpoint);
}

double PooledEstimate::se() const { return std::sqrt(total); }

double t_critical(double df, double level) {
  const double q = 0.5 + level / 2.0;
  if (std::isinf(df)) return boost::math::quantile(boost::math::normal_distribution<double>(), q);
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), q);
}

PooledEstimate pool_rubin(std::span<const PointVariance> estimates, double level,
                          double complete_df) {
  const std::size_t m = estimates.size();
  if (m < 2) throw std::invalid_argument("Rubin pooling needs at least two estimates");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0, 1)");
  if (!(complete_df > 0.0)) throw std::invalid_argument("complete-data df must be > 0");
  std::vector<double> points, variances;
  points.reserve(m);
  variances.reserve(m);
  for (const auto& e : estimates) {
    if (!std::isfinite(e.point) || !std::isfinite(e.variance) || e.variance < 0.0) {
      throw std::invalid_argument("estimates must be finite with non-negative variance");
    }
    points.push_back(e.point);
    variances.push_back(e.variance);
  }

  PooledEstimate out;
  out.m = static_cast<int>(m);
  out.level = level;
  out.point = mean(points);
  out.within = mean(variances);
  out.between = sample_variance(points);
  const double inflation = 1.0 + 1.0 / static_cast<double>(m);
  out.total = out.within + inflation * out.between;

  // Barnard-Rubin small-sample degrees of freedom.
  const double lambda = out.total > 0.0 ? inflation * out.between / out.total : 0.0;
  const double df_old = lambda > 0.0 ? (m - 1) / (lambda * lambda)
                                     : std::numeric_limits<double>::infinity();
  const double df_obs = std::isinf(complete_df)
                            ? std::numeric_limits<double>::infinity()
                            : (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - lambda);
  if (std::isinf(df_old)) {
    out.df = df_obs;
  } else if (std::isinf(df_obs)) {
    out.df = df_old;
  } else {
    out.df = 1.0 / (1.0 / df_old + 1.0 / df_obs);
  }

  const double half = t_critical(out.df, level) * out.se();
  out.lower = out.point - half;
  out.upper = out.point + half;
  return out;
}

bool coverage_indicator(const PooledEstimate& pooled, double truth) noexcept {
  return truth >= pooled.lower && truth <= pooled.upper;
}

PooledTriple pool_completed(std::span<const CompletedDataset> completed, double level) {
  std::vector<PointVariance> c, t, d;
  int n0 = 0, n1 = 0;
  for (const auto& data : completed) {
    const CompleteEstimate e = estimate_complete(data);
    c.push_back({e.mean_control, e.var_control});
    t.push_back({e.mean_treatment, e.var_treatment});
    d.push_back({e.diff, e.var_diff});
    n0 = e.n_control;
    n1 = e.n_treatment;
  }
  const auto df = [](int n) {
    return n > 0 ? static_cast<double>(n) : std::numeric_limits<double>::infinity();
  };
  return {pool_rubin(c, level, df(n0 - 1)), pool_rubin(t, level, df(n1 - 1)),
          pool_rubin(d, level, df(n0 + n1 - 2))};
}

}  // namespace rdimpute
