#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rdimpute/io.hpp"
#include "rdimpute/simharness.hpp"

namespace rdimpute::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kRuntimeError = 2 };

/// Everything a run needs, built from an optional JSON document plus command-line overrides.
struct RunConfig {
  std::string preset;  // empty: parameters come from defaults and "params"
  SimPlan plan;
  double level = 0.95;
  std::filesystem::path output_dir = "out";
};

/// Overrides given on the command line; unset fields leave the document's values alone.
struct Overrides {
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<std::vector<Method>> methods;
  std::optional<int> m_imputations;
  std::optional<int> truth_datasets;
  std::optional<int> workers;
  std::optional<std::filesystem::path> output_dir;
};

/// Parses a JSON config document. Unknown keys and ill-typed values raise ConfigError naming
/// the key path; syntax errors report line and column.
RunConfig parse_run_config(const std::string& text, const Overrides& overrides = {});
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const Overrides& overrides = {});

/// Comma-separated method letters, e.g. "B,C".
std::vector<Method> parse_methods(const std::string& list);

/// Worker count from RDIMPUTE_WORKERS, or 1.
int default_workers();

/// Canonical JSON of the run (everything that determines outputs; worker count excluded).
std::string manifest_json(const RunConfig& cfg, const std::string& command);
/// Short hash of the manifest, written into every output file.
std::string run_id(const std::string& manifest);

/// Writes metrics.csv, scenarios.csv, truth.csv and manifest.json into the output directory.
MetricsTable cmd_simulate(const RunConfig& cfg, std::ostream& log);

/// Writes truth.csv and manifest.json.
TrueValues cmd_truth(const RunConfig& cfg, std::ostream& log);

struct AnalyzeOptions {
  std::filesystem::path dataset;
  std::vector<Method> methods{Method::A, Method::B, Method::C, Method::D};
  ImputationConfig imputation{};
  double level = 0.95;
  std::filesystem::path output_dir = "out";
};

/// Reads and validates a dataset, imputes with each method and writes estimates.csv.
/// Throws IngestError listing every schema or classification problem.
std::vector<MethodEstimates> cmd_analyze(const AnalyzeOptions& opts, std::ostream& log);

/// Estimates for one in-memory dataset; cmd_analyze is this plus file handling.
std::vector<MethodEstimates> analyze_dataset(const TrialDataset& data, const AnalyzeOptions& opts);

/// Writes one simulated trial as dataset CSV.
TrialDataset cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_file);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace rdimpute::cli
