#include "rdimpute/simharness.hpp"

#include <cmath>
#include <exception>
#include <optional>
#include <sstream>

#include "rdimpute/parallel.hpp"

namespace rdimpute {

std::string_view estimand_name(Estimand e) noexcept {
  switch (e) {
    case Estimand::control: return "control";
    case Estimand::treatment: return "treatment";
    case Estimand::difference: return "difference";
  }
  return "?";
}

void SimPlan::validate() const {
  params.validate();
  imputation.validate();
  if (n_replicates < 1) throw ConfigError("n_replicates must be >= 1");
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!truth && truth_datasets < 1) throw ConfigError("truth_datasets must be >= 1");
}

ScenarioCounts count_scenarios(const TrialDataset& data) {
  ScenarioCounts counts{};
  for (const auto& s : data.subjects) {
    ++counts[arm_index(s.arm)][static_cast<int>(classify_scenario(s, data.grid))];
  }
  return counts;
}

ScenarioSummary summarize_scenarios(const std::vector<ScenarioCounts>& replicates) {
  ScenarioSummary out;
  out.n_replicates = static_cast<int>(replicates.size());
  if (replicates.empty()) return out;
  for (int a = 0; a < 2; ++a) {
    double arm_total = 0.0;
    for (int k = 0; k < kScenarioCount; ++k) {
      std::vector<double> v;
      v.reserve(replicates.size());
      for (const auto& r : replicates) v.push_back(r[a][k]);
      out.mean_count[a][k] = mean(v);
      arm_total += out.mean_count[a][k];
    }
    for (int k = 0; k < kScenarioCount; ++k) {
      out.percent[a][k] = arm_total > 0.0 ? 100.0 * out.mean_count[a][k] / arm_total : 0.0;
    }
  }
  return out;
}

const MetricRow& MetricsTable::row(Method m, Estimand e) const {
  for (const auto& r : rows) {
    if (r.method == m && r.estimand == e) return r;
  }
  throw std::out_of_range("no metrics row for method " + std::string(method_name(m)) + "/" +
                          std::string(estimand_name(e)));
}

std::uint64_t replicate_seed(std::uint64_t master, int replicate) {
  return derive_seed(master, {stream_tag::kReplicate, static_cast<std::uint64_t>(replicate),
                              stream_tag::kTrial});
}

std::uint64_t imputation_seed(std::uint64_t master, int replicate) {
  return derive_seed(master, {stream_tag::kReplicate, static_cast<std::uint64_t>(replicate),
                              stream_tag::kImputation});
}

namespace {

struct Scored {
  double point = 0.0;
  double se = 0.0;
  bool covered = false;
};

using ReplicateScores = std::optional<std::array<Scored, 3>>;

}  // namespace

MetricsTable run_plan(const SimPlan& plan) {
  plan.validate();
  MetricsTable table;
  table.n_replicates = plan.n_replicates;
  table.truth = plan.truth ? *plan.truth
                           : generate_truth(plan.params, plan.truth_datasets,
                                            derive_seed(plan.seed, {stream_tag::kTruth}),
                                            plan.workers);
  const std::array<double, 3> truth{table.truth.mean_control, table.truth.mean_treatment,
                                    table.truth.difference};

  const auto n_reps = static_cast<std::size_t>(plan.n_replicates);
  const std::size_t n_methods = plan.methods.size();
  std::vector<std::vector<ReplicateScores>> scores(n_reps,
                                                   std::vector<ReplicateScores>(n_methods));
  std::vector<std::vector<std::string>> errors(n_reps, std::vector<std::string>(n_methods));
  table.scenario_counts.resize(n_reps);

  parallel_for(n_reps, plan.workers, [&](std::size_t r) {
    const TrialDataset data = generate_trial(plan.params, replicate_seed(plan.seed, static_cast<int>(r)));
    table.scenario_counts[r] = count_scenarios(data);
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      ImputationConfig cfg = plan.imputation;
      cfg.method = plan.methods[mi];
      cfg.seed = imputation_seed(plan.seed, static_cast<int>(r));
      cfg.workers = 1;
      try {
        const ImputationResult res = impute(data, cfg);
        const PooledTriple pooled = pool_completed(res.completed);
        const PooledEstimate* est[3] = {&pooled.control, &pooled.treatment, &pooled.difference};
        std::array<Scored, 3> s;
        for (int e = 0; e < 3; ++e) {
          s[e] = {est[e]->point, est[e]->se(), coverage_indicator(*est[e], truth[e])};
        }
        scores[r][mi] = s;
      } catch (const std::exception& ex) {
        errors[r][mi] = ex.what();
      }
    }
  });

  for (std::size_t r = 0; r < n_reps; ++r) {
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      if (!scores[r][mi]) {
        table.failures.push_back({static_cast<int>(r), plan.methods[mi], errors[r][mi]});
      }
    }
  }
  table.scenarios = summarize_scenarios(table.scenario_counts);

  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    std::size_t failed = 0;
    for (std::size_t r = 0; r < n_reps; ++r) failed += scores[r][mi] ? 0 : 1;
    if (failed * 100 > n_reps) {
      std::ostringstream msg;
      msg << "method " << method_name(plan.methods[mi]) << " failed in " << failed << " of "
          << n_reps << " replicates";
      for (const auto& f : table.failures) {
        if (f.method == plan.methods[mi]) {
          msg << "; first failure (replicate " << f.replicate << "): " << f.message;
          break;
        }
      }
      throw ImputationError(msg.str());
    }
    for (Estimand e : kEstimands) {
      const int ei = static_cast<int>(e);
      std::vector<double> points, ses, covered;
      for (std::size_t r = 0; r < n_reps; ++r) {
        if (!scores[r][mi]) continue;
        const Scored& s = (*scores[r][mi])[ei];
        points.push_back(s.point);
        ses.push_back(s.se);
        covered.push_back(s.covered ? 1.0 : 0.0);
      }
      MetricRow row;
      row.method = plan.methods[mi];
      row.estimand = e;
      row.n_used = static_cast<int>(points.size());
      if (!points.empty()) {
        row.mean_estimate = mean(points);
        row.bias = row.mean_estimate - truth[ei];
        row.ese = std::sqrt(sample_variance(points));
        row.ese_defined = points.size() > 1;
        row.ase = mean(ses);
        row.cp = mean(covered);
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace rdimpute
