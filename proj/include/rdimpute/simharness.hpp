#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rdimpute/datagen.hpp"
#include "rdimpute/estimation.hpp"
#include "rdimpute/imputation.hpp"

namespace rdimpute {

enum class Estimand { control = 0, treatment = 1, difference = 2 };

inline constexpr std::array<Estimand, 3> kEstimands{Estimand::control, Estimand::treatment,
                                                    Estimand::difference};

std::string_view estimand_name(Estimand e) noexcept;

struct SimPlan {
  GenParams params;
  /// Label used in reports ("setting1", "setting2" or "custom").
  std::string setting = "custom";
  int n_replicates = 1000;
  std::vector<Method> methods{Method::A, Method::B, Method::C, Method::D};
  /// Template for every replicate; its seed and method are overwritten.
  ImputationConfig imputation{};
  std::uint64_t seed = 1;
  int workers = 1;
  int truth_datasets = 20000;
  /// Use these truths instead of running generate_truth.
  std::optional<TrueValues> truth;

  void validate() const;
};

/// Scenario counts of one dataset, indexed [arm][scenario].
using ScenarioCounts = std::array<std::array<int, kScenarioCount>, 2>;

ScenarioCounts count_scenarios(const TrialDataset& data);

struct ScenarioSummary {
  /// Mean count per replicate, [arm][scenario].
  std::array<std::array<double, kScenarioCount>, 2> mean_count{};
  std::array<std::array<double, kScenarioCount>, 2> percent{};
  int n_replicates = 0;
};

ScenarioSummary summarize_scenarios(const std::vector<ScenarioCounts>& replicates);

struct MetricRow {
  Method method = Method::A;
  Estimand estimand = Estimand::control;
  double bias = 0.0;
  /// 0 with a single replicate; see ese_defined.
  double ese = 0.0;
  double ase = 0.0;
  double cp = 0.0;
  double mean_estimate = 0.0;
  int n_used = 0;
  bool ese_defined = false;
};

/// A replicate that failed for one method; it is excluded from that method's metrics.
struct ReplicateFailure {
  int replicate = 0;
  Method method = Method::A;
  std::string message;
};

struct MetricsTable {
  std::vector<MetricRow> rows;
  ScenarioSummary scenarios;
  TrueValues truth;
  std::vector<ReplicateFailure> failures;
  /// Per-replicate scenario counts, in replicate order.
  std::vector<ScenarioCounts> scenario_counts;
  int n_replicates = 0;

  const MetricRow& row(Method m, Estimand e) const;
};

/// Runs every replicate (generate, impute per method, pool) and scores against the truth.
/// Results depend only on the plan, never on the worker count. Throws ImputationError when
/// more than 1% of replicate-method runs fail.
MetricsTable run_plan(const SimPlan& plan);

/// Seed of replicate r's dataset.
std::uint64_t replicate_seed(std::uint64_t master, int replicate);
/// Seed of replicate r's imputations for `method`.
std::uint64_t imputation_seed(std::uint64_t master, int replicate);

}  // namespace rdimpute
