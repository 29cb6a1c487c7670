#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdimpute/estimation.hpp"
#include "rdimpute/model.hpp"
#include "rdimpute/simharness.hpp"

namespace rdimpute {

/// Schema violations found while reading a dataset; one diagnostic per problem.
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/// One row per subject:
///   id,arm,baseline,y<week>...,disc_week,withdraw_week,withdraw_type
/// Visit columns declare the grid; empty cells are missing; withdraw_type is admin, other
/// or empty. Rows are reported by file line number.
TrialDataset read_dataset_csv(std::istream& in, const std::string& source = "<stream>");
TrialDataset read_dataset_csv_file(const std::string& path);

void write_dataset_csv(std::ostream& out, const TrialDataset& data);

/// method,estimand,bias,ese,ase,cp,n_used
void write_metrics_csv(std::ostream& out, const MetricsTable& table, const std::string& header_comment = {});
/// arm,statistic,S1,S2,S3,S4_51,S52
void write_scenarios_csv(std::ostream& out, const ScenarioSummary& summary,
                         const std::string& header_comment = {});
/// estimand,value,n_datasets
void write_truth_csv(std::ostream& out, const TrueValues& truth, const std::string& header_comment = {});

struct MethodEstimates {
  Method method = Method::A;
  PooledTriple pooled;
  std::size_t fallbacks = 0;
};

/// method,group,mean,se,ci_lower,ci_upper,df
void write_estimates_csv(std::ostream& out, const std::vector<MethodEstimates>& estimates,
                         const std::string& header_comment = {});

/// "Mean (SE)" per arm and "Mean (95% CI)" for the difference, one line per method.
void print_estimates_table(std::ostream& out, const std::vector<MethodEstimates>& estimates);

}  // namespace rdimpute
