#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rdimpute/model.hpp"
#include "rdimpute/random.hpp"
#include "rdimpute/survival.hpp"

namespace rdimpute {

class ImputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How missing endpoints of administrative withdrawals (S52) are filled.
///   A: adherer (S1/S2) model under MAR.
///   B: retrieved-dropout (S3) model.
///   C: per-imputation Bernoulli gate on the estimated probability of NRWL discontinuation
///      between withdrawal and study end; 1 -> retrieved-dropout model, 0 -> adherer model.
///   D: model refit each round on all non-S52 endpoints, observed and imputed.
enum class Method { A, B, C, D };

std::string_view method_name(Method m) noexcept;
Method parse_method(std::string_view name);

enum class Conditioning {
  baseline_only,
  /// Baseline plus the subject's last observed post-baseline visit before the endpoint.
  monotone_sequential,
};

struct ImputationConfig {
  Method method = Method::C;
  int m = 100;
  std::uint64_t seed = 0;
  SurvivalKind survival_kind = SurvivalKind::proportional_hazards;
  int min_donor_pool = 5;
  Conditioning mar_conditioning = Conditioning::monotone_sequential;
  Conditioning rd_conditioning = Conditioning::baseline_only;
  int workers = 1;

  void validate() const;
};

inline constexpr double kResidualVarianceFloor = 1e-8;

/// Normal linear regression of the endpoint on conditioning variables, with one draw from
/// the noninformative-prior posterior: sigma^2 ~ rss / chi^2_df, beta ~ N(beta_hat, sigma^2 (X'X)^-1).
struct NormalImputationModel {
  Eigen::VectorXd coefficients;
  double residual_variance = 0.0;
  int donors = 0;
  int df = 0;
  Eigen::VectorXd drawn_coefficients;
  double drawn_variance = 0.0;

  double predict(const Eigen::VectorXd& x) const { return coefficients.dot(x); }
  /// Posterior-predictive draw using the model's parameter draw.
  double draw(const Eigen::VectorXd& x, Rng& rng) const;
};

/// Rows of `design` include the intercept column. Requires rows > cols.
NormalImputationModel fit_normal_model(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                       Rng& rng);

/// Which donors a model is fitted on.
enum class DonorPool { adherers, retrieved_dropouts, all_non_withdrawn };

std::string_view donor_pool_name(DonorPool pool) noexcept;

/// Regression covariates: intercept, baseline, optionally one visit, optionally an arm
/// indicator (only when both arms are pooled).
struct DonorDesign {
  std::optional<std::size_t> visit;
  bool arm_indicator = false;

  std::size_t columns() const { return 2 + (visit ? 1 : 0) + (arm_indicator ? 1 : 0); }
  Eigen::VectorXd row(const SubjectRecord& s) const;
};

/// Fits a donor model on subjects whose endpoint and design visit are observed.
NormalImputationModel fit_donor_model(std::span<const SubjectRecord* const> donors,
                                      const DonorDesign& design, Rng& rng);

enum class Provenance { observed, mar_adherer, retrieved_dropout, pooled, gated_adherer, gated_rd };

std::string_view provenance_name(Provenance p) noexcept;

struct CompletedDataset {
  std::shared_ptr<const TrialDataset> source;
  std::vector<double> endpoint;
  std::vector<Provenance> provenance;

  /// Copy of the source with every endpoint filled in.
  TrialDataset materialize() const;
};

/// An arm's donor pool was below threshold and both arms were pooled with an arm indicator.
struct FallbackEvent {
  int round = 0;
  Arm arm = Arm::control;
  DonorPool pool = DonorPool::adherers;
  std::size_t donors = 0;
};

struct ImputationResult {
  std::vector<CompletedDataset> completed;
  std::vector<FallbackEvent> fallbacks;
  std::vector<Scenario> scenarios;
  /// Per-subject p-hat for S52 subjects (Method C only), NaN elsewhere.
  std::vector<double> disc_probability;
  std::vector<SurvivalModel> survival_models;
};

/// One imputation round. Each model and each subject owns a stream derived from
/// (seed, round), so results do not depend on the order of calls.
class ImputationRound {
 public:
  ImputationRound(std::shared_ptr<const TrialDataset> data, std::span<const Scenario> scenarios,
                  const ImputationConfig& cfg, int round);

  /// Adherer (S1/S2) model under MAR.
  void impute_mar(std::size_t subject, Provenance tag = Provenance::mar_adherer);
  /// Retrieved-dropout (S3) model.
  void impute_retrieved_dropout(std::size_t subject, Provenance tag = Provenance::retrieved_dropout);
  /// Bernoulli(p) gate between the two models above.
  void impute_gated(std::size_t subject, double disc_probability);
  /// All non-S52 endpoints of the arm as donors; call after S2 and S4_51 are filled.
  void impute_pooled(std::size_t subject);

  const NormalImputationModel& model(DonorPool pool, Arm arm, std::optional<std::size_t> visit);

  const std::vector<double>& endpoint() const { return endpoint_; }
  std::span<const FallbackEvent> fallbacks() const { return fallbacks_; }
  CompletedDataset finish() &&;

 private:
  struct Key {
    DonorPool pool;
    int arm;
    int visit;
    auto operator<=>(const Key&) const = default;
  };

  std::optional<std::size_t> design_visit(std::size_t subject, Conditioning c) const;
  bool is_donor(std::size_t i, DonorPool pool, std::optional<std::size_t> visit) const;
  void fill(std::size_t subject, DonorPool pool, std::optional<std::size_t> visit, Provenance tag);

  std::shared_ptr<const TrialDataset> data_;
  std::span<const Scenario> scenarios_;
  ImputationConfig cfg_;
  int round_;
  std::uint64_t round_seed_;
  std::vector<double> endpoint_;
  std::vector<Provenance> provenance_;
  std::map<Key, std::pair<NormalImputationModel, DonorDesign>> models_;
  std::vector<FallbackEvent> fallbacks_;
};

/// Per-subject gate probability for S52 subjects.
using GateProbability = std::function<double(std::size_t subject)>;

/// Fills S2 (MAR) and S4_51 (retrieved dropouts), then S52 according to `method`.
/// `gate` is used for Method C only.
ImputationResult impute(const TrialDataset& data, const ImputationConfig& cfg,
                        const GateProbability& gate = {});

ImputationResult impute_method_A(const TrialDataset& data, ImputationConfig cfg);
ImputationResult impute_method_B(const TrialDataset& data, ImputationConfig cfg);
/// Fits per-arm survival models (only for arms with S52 subjects) and gates on p-hat.
ImputationResult impute_method_C(const TrialDataset& data, ImputationConfig cfg);
ImputationResult impute_method_D(const TrialDataset& data, ImputationConfig cfg);

/// Method C machinery with a caller-supplied gate probability.
ImputationResult impute_gated(const TrialDataset& data, ImputationConfig cfg,
                              const GateProbability& gate);

}  // namespace rdimpute
