#include "rdimpute/imputation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>

#include "rdimpute/parallel.hpp"

namespace rdimpute {

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::A: return "A";
    case Method::B: return "B";
    case Method::C: return "C";
    case Method::D: return "D";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "A" || name == "a") return Method::A;
  if (name == "B" || name == "b") return Method::B;
  if (name == "C" || name == "c") return Method::C;
  if (name == "D" || name == "d") return Method::D;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected A, B, C or D)");
}

std::string_view donor_pool_name(DonorPool pool) noexcept {
  switch (pool) {
    case DonorPool::adherers: return "adherers";
    case DonorPool::retrieved_dropouts: return "retrieved_dropouts";
    case DonorPool::all_non_withdrawn: return "all_non_withdrawn";
  }
  return "?";
}

std::string_view provenance_name(Provenance p) noexcept {
  switch (p) {
    case Provenance::observed: return "observed";
    case Provenance::mar_adherer: return "mar_adherer";
    case Provenance::retrieved_dropout: return "retrieved_dropout";
    case Provenance::pooled: return "pooled";
    case Provenance::gated_adherer: return "gated_adherer";
    case Provenance::gated_rd: return "gated_rd";
  }
  return "?";
}

void ImputationConfig::validate() const {
  if (m < 2) throw ConfigError("number of imputations must be >= 2");
  if (min_donor_pool < 2) throw ConfigError("min_donor_pool must be >= 2");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

double NormalImputationModel::draw(const Eigen::VectorXd& x, Rng& rng) const {
  return drawn_coefficients.dot(x) + std::sqrt(drawn_variance) * rng.normal();
}

NormalImputationModel fit_normal_model(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                       Rng& rng) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (n <= p) throw ImputationError("donor model needs more donors than regression columns");

  Eigen::MatrixXd xtx = design.transpose() * design;
  Eigen::LLT<Eigen::MatrixXd> llt(xtx);
  if (llt.info() != Eigen::Success) {
    // Collinear donors (e.g. identical baselines); a tiny ridge keeps the fit defined.
    xtx.diagonal().array() += 1e-10 * std::max(1.0, xtx.diagonal().mean());
    llt.compute(xtx);
    if (llt.info() != Eigen::Success) throw ImputationError("donor design matrix is singular");
  }

  NormalImputationModel m;
  m.coefficients = llt.solve(design.transpose() * y);
  const double rss = (y - design * m.coefficients).squaredNorm();
  m.donors = static_cast<int>(n);
  m.df = static_cast<int>(n - p);
  m.residual_variance = rss / m.df;

  const double chi2 = std::chi_squared_distribution<double>(m.df)(rng);
  m.drawn_variance = std::max(kResidualVarianceFloor, rss / chi2);
  Eigen::VectorXd z(p);
  for (Eigen::Index c = 0; c < p; ++c) z(c) = rng.normal();
  // beta* = beta_hat + sigma* L^{-T} z has covariance sigma*^2 (X'X)^{-1}.
  m.drawn_coefficients =
      m.coefficients + std::sqrt(m.drawn_variance) * llt.matrixU().solve(z);
  return m;
}

Eigen::VectorXd DonorDesign::row(const SubjectRecord& s) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(columns()));
  Eigen::Index c = 0;
  r(c++) = 1.0;
  r(c++) = s.baseline;
  if (visit) r(c++) = *s.outcomes[*visit];
  if (arm_indicator) r(c++) = arm_index(s.arm);
  return r;
}

NormalImputationModel fit_donor_model(std::span<const SubjectRecord* const> donors,
                                      const DonorDesign& design, Rng& rng) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(donors.size()),
                    static_cast<Eigen::Index>(design.columns()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(donors.size()));
  for (std::size_t i = 0; i < donors.size(); ++i) {
    const auto& s = *donors[i];
    if (!s.endpoint_observed() || (design.visit && s.missing[*design.visit])) {
      throw ImputationError("donor '" + s.id + "' lacks a value the donor model needs");
    }
    x.row(static_cast<Eigen::Index>(i)) = design.row(s).transpose();
    y(static_cast<Eigen::Index>(i)) = s.endpoint();
  }
  return fit_normal_model(x, y, rng);
}

TrialDataset CompletedDataset::materialize() const {
  TrialDataset out = *source;
  const std::size_t last = out.grid.endpoint_index();
  for (std::size_t i = 0; i < out.subjects.size(); ++i) {
    auto& s = out.subjects[i];
    s.outcomes[last] = endpoint[i];
    s.missing[last] = false;
  }
  out.provenance += " (completed)";
  return out;
}

ImputationRound::ImputationRound(std::shared_ptr<const TrialDataset> data,
                                 std::span<const Scenario> scenarios,
                                 const ImputationConfig& cfg, int round)
    : data_(std::move(data)),
      scenarios_(scenarios),
      cfg_(cfg),
      round_(round),
      round_seed_(derive_seed(cfg.seed, {stream_tag::kImputation, static_cast<std::uint64_t>(round)})) {
  const auto& subjects = data_->subjects;
  endpoint_.assign(subjects.size(), std::numeric_limits<double>::quiet_NaN());
  provenance_.assign(subjects.size(), Provenance::observed);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].endpoint_observed()) endpoint_[i] = subjects[i].endpoint();
  }
}

std::optional<std::size_t> ImputationRound::design_visit(std::size_t subject,
                                                         Conditioning c) const {
  if (c == Conditioning::baseline_only) return std::nullopt;
  const auto& s = data_->subjects[subject];
  for (std::size_t k = data_->grid.endpoint_index(); k-- > 0;) {
    if (!s.missing[k]) return k;
  }
  return std::nullopt;
}

bool ImputationRound::is_donor(std::size_t i, DonorPool pool,
                               std::optional<std::size_t> visit) const {
  const auto& s = data_->subjects[i];
  const Scenario sc = scenarios_[i];
  if (visit && s.missing[*visit]) return false;
  switch (pool) {
    case DonorPool::adherers:
      return (sc == Scenario::s1 || sc == Scenario::s2) && s.endpoint_observed();
    case DonorPool::retrieved_dropouts:
      return sc == Scenario::s3;
    case DonorPool::all_non_withdrawn:
      return sc != Scenario::s52 && !std::isnan(endpoint_[i]);
  }
  return false;
}

const NormalImputationModel& ImputationRound::model(DonorPool pool, Arm arm,
                                                    std::optional<std::size_t> visit) {
  const Key key{pool, arm_index(arm), visit ? static_cast<int>(*visit) : -1};
  if (auto it = models_.find(key); it != models_.end()) return it->second.first;

  DonorDesign design{visit, false};
  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < data_->subjects.size(); ++i) {
    if (data_->subjects[i].arm == arm && is_donor(i, pool, visit)) donors.push_back(i);
  }
  const std::size_t needed =
      std::max<std::size_t>(static_cast<std::size_t>(cfg_.min_donor_pool), design.columns() + 1);
  if (donors.size() < needed) {
    fallbacks_.push_back({round_, arm, pool, donors.size()});
    design.arm_indicator = true;
    donors.clear();
    for (std::size_t i = 0; i < data_->subjects.size(); ++i) {
      if (is_donor(i, pool, visit)) donors.push_back(i);
    }
    if (donors.size() < design.columns() + 1) {
      throw ImputationError("donor pool '" + std::string(donor_pool_name(pool)) +
                            "' is too small even after pooling both arms");
    }
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(donors.size()),
                    static_cast<Eigen::Index>(design.columns()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(donors.size()));
  for (std::size_t r = 0; r < donors.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = design.row(data_->subjects[donors[r]]).transpose();
    y(static_cast<Eigen::Index>(r)) = endpoint_[donors[r]];
  }
  Rng rng(derive_seed(round_seed_, {stream_tag::kModel, static_cast<std::uint64_t>(pool),
                                    static_cast<std::uint64_t>(key.arm),
                                    static_cast<std::uint64_t>(key.visit + 1)}));
  auto [it, inserted] =
      models_.emplace(key, std::make_pair(fit_normal_model(x, y, rng), design));
  return it->second.first;
}

void ImputationRound::fill(std::size_t subject, DonorPool pool,
                           std::optional<std::size_t> visit, Provenance tag) {
  const auto& s = data_->subjects[subject];
  if (s.endpoint_observed()) return;
  const auto& m = model(pool, s.arm, visit);
  const Key key{pool, arm_index(s.arm), visit ? static_cast<int>(*visit) : -1};
  const DonorDesign& design = models_.at(key).second;
  Rng rng(derive_seed(round_seed_, {stream_tag::kValue, subject}));
  endpoint_[subject] = m.draw(design.row(s), rng);
  provenance_[subject] = tag;
}

void ImputationRound::impute_mar(std::size_t subject, Provenance tag) {
  fill(subject, DonorPool::adherers, design_visit(subject, cfg_.mar_conditioning), tag);
}

void ImputationRound::impute_retrieved_dropout(std::size_t subject, Provenance tag) {
  fill(subject, DonorPool::retrieved_dropouts, design_visit(subject, cfg_.rd_conditioning), tag);
}

void ImputationRound::impute_gated(std::size_t subject, double disc_probability) {
  Rng gate(derive_seed(round_seed_, {stream_tag::kGate, subject}));
  if (gate.bernoulli(disc_probability)) {
    impute_retrieved_dropout(subject, Provenance::gated_rd);
  } else {
    impute_mar(subject, Provenance::gated_adherer);
  }
}

void ImputationRound::impute_pooled(std::size_t subject) {
  fill(subject, DonorPool::all_non_withdrawn, std::nullopt, Provenance::pooled);
}

CompletedDataset ImputationRound::finish() && {
  return {data_, std::move(endpoint_), std::move(provenance_)};
}

namespace {

ImputationResult run_rounds(const TrialDataset& data, const ImputationConfig& cfg,
                            const GateProbability& gate, ImputationResult result) {
  auto shared = std::make_shared<const TrialDataset>(data);
  const std::span<const Scenario> scenarios = result.scenarios;
  result.completed.resize(static_cast<std::size_t>(cfg.m));
  std::vector<std::vector<FallbackEvent>> events(static_cast<std::size_t>(cfg.m));

  parallel_for(static_cast<std::size_t>(cfg.m), cfg.workers, [&](std::size_t r) {
    ImputationRound round(shared, scenarios, cfg, static_cast<int>(r));
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      if (scenarios[i] == Scenario::s2) round.impute_mar(i);
      if (scenarios[i] == Scenario::s4_51) round.impute_retrieved_dropout(i);
    }
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      if (scenarios[i] != Scenario::s52) continue;
      switch (cfg.method) {
        case Method::A: round.impute_mar(i); break;
        case Method::B: round.impute_retrieved_dropout(i); break;
        case Method::C: round.impute_gated(i, gate(i)); break;
        case Method::D: round.impute_pooled(i); break;
      }
    }
    events[r].assign(round.fallbacks().begin(), round.fallbacks().end());
    result.completed[r] = std::move(round).finish();
  });
  for (auto& e : events) result.fallbacks.insert(result.fallbacks.end(), e.begin(), e.end());
  return result;
}

ImputationResult prepare(const TrialDataset& data, const ImputationConfig& cfg) {
  cfg.validate();
  ImputationResult r;
  r.scenarios = classify_all(data);
  r.disc_probability.assign(data.subjects.size(), std::numeric_limits<double>::quiet_NaN());
  return r;
}

}  // namespace

ImputationResult impute(const TrialDataset& data, const ImputationConfig& cfg,
                        const GateProbability& gate) {
  if (cfg.method == Method::C && !gate) return impute_method_C(data, cfg);
  return run_rounds(data, cfg, gate, prepare(data, cfg));
}

ImputationResult impute_method_A(const TrialDataset& data, ImputationConfig cfg) {
  cfg.method = Method::A;
  return run_rounds(data, cfg, {}, prepare(data, cfg));
}

ImputationResult impute_method_B(const TrialDataset& data, ImputationConfig cfg) {
  cfg.method = Method::B;
  return run_rounds(data, cfg, {}, prepare(data, cfg));
}

ImputationResult impute_method_D(const TrialDataset& data, ImputationConfig cfg) {
  cfg.method = Method::D;
  return run_rounds(data, cfg, {}, prepare(data, cfg));
}

ImputationResult impute_gated(const TrialDataset& data, ImputationConfig cfg,
                              const GateProbability& gate) {
  cfg.method = Method::C;
  ImputationResult r = prepare(data, cfg);
  for (std::size_t i = 0; i < r.scenarios.size(); ++i) {
    if (r.scenarios[i] == Scenario::s52) r.disc_probability[i] = gate(i);
  }
  const std::vector<double> probs = r.disc_probability;
  return run_rounds(data, cfg, [&probs](std::size_t i) { return probs[i]; }, std::move(r));
}

ImputationResult impute_method_C(const TrialDataset& data, ImputationConfig cfg) {
  cfg.method = Method::C;
  ImputationResult r = prepare(data, cfg);
  const double d = data.grid.duration();
  for (Arm arm : {Arm::control, Arm::experimental}) {
    bool needed = false;
    for (std::size_t i = 0; i < r.scenarios.size(); ++i) {
      needed = needed || (r.scenarios[i] == Scenario::s52 && data.subjects[i].arm == arm);
    }
    if (!needed) continue;
    const auto sample = build_survival_sample(data, r.scenarios, arm);
    SurvivalModel model = fit_survival(sample, cfg.survival_kind);
    for (std::size_t i = 0; i < r.scenarios.size(); ++i) {
      const auto& s = data.subjects[i];
      if (r.scenarios[i] != Scenario::s52 || s.arm != arm) continue;
      const double x[] = {s.baseline};
      r.disc_probability[i] = conditional_disc_probability(
          conditional_survival(model, *s.withdraw_time, x), conditional_survival(model, d, x));
    }
    r.survival_models.push_back(std::move(model));
  }
  const std::vector<double> probs = r.disc_probability;
  return run_rounds(data, cfg, [&probs](std::size_t i) { return probs[i]; }, std::move(r));
}

}  // namespace rdimpute
