#include "rdimpute/survival.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rdimpute {

namespace {

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd hessian;
};

/// Sample sorted by ascending time with its covariate matrix (one row per observation).
struct PreparedSample {
  std::vector<double> time;
  std::vector<char> event;
  Eigen::MatrixXd x;
};

PreparedSample prepare(std::span<const SurvivalObservation> sample, std::size_t p) {
  std::vector<std::size_t> order(sample.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sample[a].time < sample[b].time; });
  PreparedSample out;
  out.time.reserve(sample.size());
  out.event.reserve(sample.size());
  out.x.resize(static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& obs = sample[order[r]];
    out.time.push_back(obs.time);
    out.event.push_back(obs.event ? 1 : 0);
    for (std::size_t c = 0; c < p; ++c) out.x(r, c) = obs.covariates[c];
  }
  return out;
}

/// Breslow partial likelihood with score and Hessian. Risk sets are accumulated from the
/// latest time backwards; tied times enter the risk set together.
Evaluation evaluate(const PreparedSample& s, const Eigen::VectorXd& beta,
                    std::vector<double>* increments = nullptr,
                    std::vector<double>* event_times = nullptr) {
  const Eigen::Index n = s.x.rows();
  const Eigen::Index p = s.x.cols();
  const Eigen::VectorXd eta = p > 0 ? Eigen::VectorXd(s.x * beta) : Eigen::VectorXd::Zero(n);

  Evaluation ev;
  ev.score = Eigen::VectorXd::Zero(p);
  ev.hessian = Eigen::MatrixXd::Zero(p, p);
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  Eigen::Index i = n - 1;
  while (i >= 0) {
    Eigen::Index j = i;
    while (j >= 0 && s.time[j] == s.time[i]) --j;
    int deaths = 0;
    Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
    double eta_sum = 0.0;
    for (Eigen::Index r = i; r > j; --r) {
      const double w = std::exp(eta(r));
      s0 += w;
      if (p > 0) {
        s1 += w * s.x.row(r).transpose();
        s2 += w * s.x.row(r).transpose() * s.x.row(r);
      }
      if (s.event[r]) {
        ++deaths;
        eta_sum += eta(r);
        if (p > 0) xsum += s.x.row(r).transpose();
      }
    }
    if (deaths > 0) {
      ev.loglik += eta_sum - deaths * std::log(s0);
      if (p > 0) {
        const Eigen::VectorXd xbar = s1 / s0;
        ev.score += xsum - deaths * xbar;
        ev.hessian -= deaths * (s2 / s0 - xbar * xbar.transpose());
      }
      if (increments) {
        increments->push_back(deaths / s0);
        event_times->push_back(s.time[i]);
      }
    }
    i = j;
  }
  if (increments) {
    std::reverse(increments->begin(), increments->end());
    std::reverse(event_times->begin(), event_times->end());
  }
  return ev;
}

void check_sample(std::span<const SurvivalObservation> sample, std::size_t p) {
  if (sample.empty()) throw SurvivalError("degenerate survival fit: empty sample");
  bool any_event = false;
  for (const auto& obs : sample) {
    if (!std::isfinite(obs.time) || obs.time < 0.0) {
      throw SurvivalError("survival time must be finite and non-negative");
    }
    if (obs.covariates.size() != p) throw SurvivalError("covariate vectors differ in length");
    for (double v : obs.covariates) {
      if (!std::isfinite(v)) throw SurvivalError("covariates must be finite");
    }
    any_event = any_event || obs.event;
  }
  if (!any_event) throw SurvivalError("degenerate survival fit: no events");
}

SurvivalModel product_limit(const PreparedSample& s, std::size_t p, SurvivalKind kind) {
  SurvivalModel m;
  m.kind = kind;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(0);
  PreparedSample no_x{s.time, s.event, Eigen::MatrixXd(s.x.rows(), 0)};
  m.log_likelihood = evaluate(no_x, zero, &m.hazard_increments, &m.event_times).loglik;
  if (kind == SurvivalKind::proportional_hazards) {
    m.coefficients.assign(p, 0.0);
    m.covariate_means.assign(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) m.covariate_means[c] = s.x.col(c).mean();
  }
  return m;
}

}  // namespace

double SurvivalModel::cumulative_baseline_hazard(double t) const {
  double h = 0.0;
  for (std::size_t i = 0; i < event_times.size() && event_times[i] <= t; ++i) {
    h += hazard_increments[i];
  }
  return h;
}

SurvivalModel fit_survival(std::span<const SurvivalObservation> sample, SurvivalKind kind,
                           const SurvivalFitOptions& options) {
  const std::size_t p = sample.empty() ? 0 : sample.front().covariates.size();
  check_sample(sample, p);
  PreparedSample prepared = prepare(sample, p);
  if (kind == SurvivalKind::covariate_free) return product_limit(prepared, p, kind);

  // Center, and pin coefficients of constant covariates at zero.
  std::vector<double> means(p), sds(p);
  std::vector<Eigen::Index> active;
  for (std::size_t c = 0; c < p; ++c) {
    const auto col = prepared.x.col(static_cast<Eigen::Index>(c));
    means[c] = col.mean();
    sds[c] = std::sqrt((col.array() - means[c]).square().mean());
    if (sds[c] > 0.0) active.push_back(static_cast<Eigen::Index>(c));
  }
  if (active.empty()) return product_limit(prepared, p, kind);

  PreparedSample reduced{prepared.time, prepared.event,
                         Eigen::MatrixXd(prepared.x.rows(), static_cast<Eigen::Index>(active.size()))};
  for (std::size_t a = 0; a < active.size(); ++a) {
    reduced.x.col(static_cast<Eigen::Index>(a)) =
        prepared.x.col(active[a]).array() - means[static_cast<std::size_t>(active[a])];
  }

  const auto q = static_cast<Eigen::Index>(active.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  Evaluation current = evaluate(reduced, beta);
  auto separated = [&](const Eigen::VectorXd& b) {
    for (Eigen::Index a = 0; a < q; ++a) {
      if (std::abs(b(a)) * sds[static_cast<std::size_t>(active[a])] > options.separation_bound) {
        return true;
      }
    }
    return false;
  };
  auto fallback = [&] {
    SurvivalModel m = product_limit(prepared, p, SurvivalKind::covariate_free);
    m.fell_back = true;
    return m;
  };

  int iter = 0;
  bool converged = false;
  while (iter < options.max_iterations) {
    ++iter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-current.hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      return fallback();
    }
    Eigen::VectorXd step = ldlt.solve(current.score);
    Eigen::VectorXd trial = beta + step;
    Evaluation next = evaluate(reduced, trial);
    int halvings = 0;
    while (!(next.loglik >= current.loglik) && halvings < 30) {
      step *= 0.5;
      trial = beta + step;
      next = evaluate(reduced, trial);
      ++halvings;
    }
    const double change = std::abs(next.loglik - current.loglik);
    beta = trial;
    current = std::move(next);
    if (separated(beta)) return fallback();
    if (change < options.loglik_tolerance) {
      converged = true;
      break;
    }
  }
  // Monotone likelihood can flatten below the tolerance before the bound is reached; the
  // information for that coefficient is then vanishingly small.
  if (converged) {
    for (Eigen::Index a = 0; a < q; ++a) {
      const double sd = sds[static_cast<std::size_t>(active[a])];
      if (-current.hessian(a, a) * sd * sd < 1e-8) return fallback();
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "survival fit did not converge after " << iter
        << " iterations (log-likelihood " << current.loglik << ", beta";
    for (Eigen::Index a = 0; a < q; ++a) msg << ' ' << beta(a);
    msg << ")";
    throw SurvivalError(msg.str());
  }

  SurvivalModel m;
  m.kind = kind;
  m.coefficients.assign(p, 0.0);
  for (Eigen::Index a = 0; a < q; ++a) {
    m.coefficients[static_cast<std::size_t>(active[a])] = beta(a);
  }
  m.covariate_means = means;
  m.log_likelihood = evaluate(reduced, beta, &m.hazard_increments, &m.event_times).loglik;
  m.iterations = iter;
  return m;
}

double conditional_survival(const SurvivalModel& model, double t, std::span<const double> x) {
  double risk = 1.0;
  if (!model.coefficients.empty()) {
    if (x.size() != model.coefficients.size()) {
      throw std::invalid_argument("covariate vector does not match the survival model");
    }
    double lp = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      lp += model.coefficients[c] * (x[c] - model.covariate_means[c]);
    }
    risk = std::exp(lp);
  }
  double s = 1.0;
  for (std::size_t i = 0; i < model.event_times.size() && model.event_times[i] <= t; ++i) {
    const double base = std::max(0.0, 1.0 - model.hazard_increments[i]);
    s *= risk == 1.0 ? base : std::pow(base, risk);
  }
  return std::clamp(s, 0.0, 1.0);
}

double conditional_disc_probability(double survival_at_withdrawal, double survival_at_end) {
  if (!(survival_at_withdrawal > 0.0)) {
    throw SurvivalError("conditioning on zero-probability survival");
  }
  const double p = (survival_at_withdrawal - survival_at_end) / survival_at_withdrawal;
  return std::clamp(p, 0.0, 1.0);
}

double prob_disc_before_end(const SurvivalModel& model, double v, double d,
                            std::span<const double> x) {
  if (!(v > 0.0 && v < d)) {
    throw std::invalid_argument("withdrawal time must lie strictly inside (0, d)");
  }
  return conditional_disc_probability(conditional_survival(model, v, x),
                                      conditional_survival(model, d, x));
}

double cox_partial_loglik(std::span<const SurvivalObservation> sample,
                          std::span<const double> beta) {
  const PreparedSample s = prepare(sample, beta.size());
  Eigen::VectorXd b(static_cast<Eigen::Index>(beta.size()));
  for (std::size_t c = 0; c < beta.size(); ++c) b(static_cast<Eigen::Index>(c)) = beta[c];
  return evaluate(s, b).loglik;
}

std::vector<double> cox_score(std::span<const SurvivalObservation> sample,
                              std::span<const double> beta) {
  const PreparedSample s = prepare(sample, beta.size());
  Eigen::VectorXd b(static_cast<Eigen::Index>(beta.size()));
  for (std::size_t c = 0; c < beta.size(); ++c) b(static_cast<Eigen::Index>(c)) = beta[c];
  const Evaluation ev = evaluate(s, b);
  return {ev.score.data(), ev.score.data() + ev.score.size()};
}

std::vector<SurvivalObservation> build_survival_sample(const TrialDataset& data,
                                                       std::span<const Scenario> scenarios,
                                                       Arm arm) {
  const double d = data.grid.duration();
  std::vector<SurvivalObservation> out;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& s = data.subjects[i];
    if (s.arm != arm) continue;
    SurvivalObservation obs;
    obs.covariates = {s.baseline};
    switch (scenarios[i]) {
      case Scenario::s1:
      case Scenario::s2:
        obs.time = d;
        break;
      case Scenario::s3:
        obs.time = *s.disc_time;
        obs.event = true;
        break;
      case Scenario::s4_51:
        obs.time = (s.disc_time && *s.disc_time < d) ? *s.disc_time : *s.withdraw_time;
        obs.event = true;
        break;
      case Scenario::s52:
        obs.time = *s.withdraw_time;
        break;
    }
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace rdimpute
