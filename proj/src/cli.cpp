#include "rdimpute/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "rdimpute/io.hpp"
#include "rdimpute/version.hpp"

namespace rdimpute::cli {

using nlohmann::json;

namespace {

/// Walks one JSON object, type-checking known keys and rejecting the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }

  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<int>();
    }
  }

  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        fail(key, "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }

  void get(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) out = numbers(*v, key);
  }

  std::vector<double> numbers(const json& v, const std::string& key) const {
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError("config key '" + key_path(key) + "': " + msg);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + key_path(it.key()) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "config key '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Conditioning parse_conditioning(const std::string& s, const std::string& key) {
  if (s == "baseline_only") return Conditioning::baseline_only;
  if (s == "monotone_sequential") return Conditioning::monotone_sequential;
  throw ConfigError("config key '" + key + "': expected baseline_only or monotone_sequential");
}

const char* conditioning_name(Conditioning c) {
  return c == Conditioning::baseline_only ? "baseline_only" : "monotone_sequential";
}

SurvivalKind parse_survival(const std::string& s) {
  if (s == "proportional_hazards") return SurvivalKind::proportional_hazards;
  if (s == "covariate_free") return SurvivalKind::covariate_free;
  throw ConfigError(
      "config key 'imputation.survival': expected proportional_hazards or covariate_free");
}

const char* survival_name(SurvivalKind k) {
  return k == SurvivalKind::proportional_hazards ? "proportional_hazards" : "covariate_free";
}

void read_params(ObjectReader& r, GenParams& p) {
  r.get("n_per_arm", p.n_per_arm);
  if (const json* v = r.find("theta")) {
    auto t = r.numbers(*v, "theta");
    if (t.size() != 2) r.fail("theta", "expected [control, experimental]");
    p.theta = {t[0], t[1]};
  }
  r.get("beta0", p.beta0);
  r.get("beta1", p.beta1);
  r.get("baseline_beta_a", p.baseline_beta_a);
  r.get("baseline_beta_b", p.baseline_beta_b);
  r.get("baseline_loc", p.baseline_loc);
  r.get("baseline_scale", p.baseline_scale);
  r.get("mu_x", p.mu_x);
  r.get("kappa", p.kappa);
  r.get("sigma_s2", p.sigma_s2);
  r.get("sigma_e2", p.sigma_e2);
  r.get("alpha0", p.alpha0);
  r.get("alpha1", p.alpha1);
  if (const json* v = r.find("dropout_extra")) {
    if (!v->is_array() || v->size() != 2) r.fail("dropout_extra", "expected [[control...], [experimental...]]");
    p.dropout_extra = {r.numbers((*v)[0], "dropout_extra"), r.numbers((*v)[1], "dropout_extra")};
  }
  r.get("withdrawal_rate", p.withdrawal_rate);
  r.get("washout_weeks", p.washout_weeks);
  r.get("p_miss_completer", p.p_miss_completer);
  r.get("p_miss_retained_dropout", p.p_miss_retained_dropout);
  if (const json* v = r.find("visit_weeks")) {
    try {
      p.grid = VisitGrid(r.numbers(*v, "visit_weeks"));
    } catch (const ConfigError& e) {
      r.fail("visit_weeks", e.what());
    }
  }
  r.finish();
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << body;
}

std::string comment_for(const std::string& id) { return "run_id=" + id + " manifest=manifest.json"; }

}  // namespace

int default_workers() {
  if (const char* env = std::getenv("RDIMPUTE_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    throw ConfigError("RDIMPUTE_WORKERS must be a positive integer");
  }
  return 1;
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Method m = parse_method(item);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

RunConfig parse_run_config(const std::string& text, const Overrides& ov) {
  json doc = json::object();
  if (!text.empty()) {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("config is not valid JSON at " + line_column(text, e.byte) + ": " + e.what());
    }
  }
  ObjectReader top(doc, "");

  RunConfig cfg;
  top.get("preset", cfg.preset);
  if (ov.preset) cfg.preset = *ov.preset;
  SimPlan& plan = cfg.plan;
  plan.params = cfg.preset.empty() ? GenParams{} : preset_params(cfg.preset);
  plan.setting = cfg.preset.empty() ? "custom" : cfg.preset;
  plan.imputation.m = 100;
  plan.workers = default_workers();

  if (const json* p = top.find("params")) {
    ObjectReader r(*p, "params");
    read_params(r, plan.params);
  }
  if (const json* p = top.find("plan")) {
    ObjectReader r(*p, "plan");
    r.get("replicates", plan.n_replicates);
    r.get("truth_datasets", plan.truth_datasets);
    r.get("workers", plan.workers);
    if (const json* m = r.find("methods")) {
      if (!m->is_array()) r.fail("methods", "expected an array of method letters");
      std::string joined;
      for (const auto& e : *m) {
        if (!e.is_string()) r.fail("methods", "expected an array of method letters");
        joined += e.get<std::string>() + ",";
      }
      plan.methods = parse_methods(joined);
    }
    r.finish();
  }
  if (const json* p = top.find("imputation")) {
    ObjectReader r(*p, "imputation");
    r.get("m", plan.imputation.m);
    r.get("min_donor_pool", plan.imputation.min_donor_pool);
    std::string s;
    if (r.find("mar_conditioning")) {
      r.get("mar_conditioning", s);
      plan.imputation.mar_conditioning = parse_conditioning(s, "imputation.mar_conditioning");
    }
    if (r.find("rd_conditioning")) {
      r.get("rd_conditioning", s);
      plan.imputation.rd_conditioning = parse_conditioning(s, "imputation.rd_conditioning");
    }
    if (r.find("survival")) {
      r.get("survival", s);
      plan.imputation.survival_kind = parse_survival(s);
    }
    r.finish();
  }
  top.get("seed", plan.seed);
  top.get("level", cfg.level);
  std::string out_dir;
  top.get("output_dir", out_dir);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  top.finish();

  if (ov.seed) plan.seed = *ov.seed;
  if (ov.replicates) plan.n_replicates = *ov.replicates;
  if (ov.methods) plan.methods = *ov.methods;
  if (ov.m_imputations) plan.imputation.m = *ov.m_imputations;
  if (ov.truth_datasets) plan.truth_datasets = *ov.truth_datasets;
  if (ov.workers) plan.workers = *ov.workers;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;

  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ConfigError("config key 'level': must be in (0, 1)");
  plan.validate();
  return cfg;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const Overrides& ov) {
  std::string text;
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path->string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_run_config(text, ov);
}

std::string manifest_json(const RunConfig& cfg, const std::string& command) {
  const SimPlan& plan = cfg.plan;
  const GenParams& p = plan.params;
  json params = {{"n_per_arm", p.n_per_arm},
                 {"theta", {p.theta[0], p.theta[1]}},
                 {"beta0", p.beta0},
                 {"beta1", p.beta1},
                 {"baseline_beta_a", p.baseline_beta_a},
                 {"baseline_beta_b", p.baseline_beta_b},
                 {"baseline_loc", p.baseline_loc},
                 {"baseline_scale", p.baseline_scale},
                 {"mu_x", p.mu_x},
                 {"kappa", p.kappa},
                 {"sigma_s2", p.sigma_s2},
                 {"sigma_e2", p.sigma_e2},
                 {"alpha0", p.alpha0},
                 {"alpha1", p.alpha1},
                 {"dropout_extra", {p.dropout_extra[0], p.dropout_extra[1]}},
                 {"withdrawal_rate", p.withdrawal_rate},
                 {"washout_weeks", p.washout_weeks},
                 {"p_miss_completer", p.p_miss_completer},
                 {"p_miss_retained_dropout", p.p_miss_retained_dropout},
                 {"visit_weeks", p.grid.weeks()}};
  json methods = json::array();
  for (Method m : plan.methods) methods.push_back(std::string(method_name(m)));
  json manifest = {
      {"tool", "rdimpute"},
      {"version", kVersion},
      {"command", command},
      {"preset", cfg.preset},
      {"seed", plan.seed},
      {"level", cfg.level},
      {"params", params},
      {"plan",
       {{"replicates", plan.n_replicates},
        {"methods", methods},
        {"truth_datasets", plan.truth_datasets}}},
      {"imputation",
       {{"m", plan.imputation.m},
        {"min_donor_pool", plan.imputation.min_donor_pool},
        {"mar_conditioning", conditioning_name(plan.imputation.mar_conditioning)},
        {"rd_conditioning", conditioning_name(plan.imputation.rd_conditioning)},
        {"survival", survival_name(plan.imputation.survival_kind)}}}};
  return manifest.dump(2) + "\n";
}

std::string run_id(const std::string& manifest) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : manifest) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

MetricsTable cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const std::string manifest = manifest_json(cfg, "simulate");
  const std::string id = run_id(manifest);
  std::filesystem::create_directories(cfg.output_dir);
  log << "simulate: " << cfg.plan.n_replicates << " replicates, setting " << cfg.plan.setting
      << ", M=" << cfg.plan.imputation.m << ", workers=" << cfg.plan.workers << '\n';
  const MetricsTable table = run_plan(cfg.plan);

  std::ostringstream metrics, scenarios, truth;
  write_metrics_csv(metrics, table, comment_for(id));
  write_scenarios_csv(scenarios, table.scenarios, comment_for(id));
  write_truth_csv(truth, table.truth, comment_for(id));
  write_file(cfg.output_dir / "manifest.json", manifest);
  write_file(cfg.output_dir / "metrics.csv", metrics.str());
  write_file(cfg.output_dir / "scenarios.csv", scenarios.str());
  write_file(cfg.output_dir / "truth.csv", truth.str());
  if (!table.failures.empty()) {
    log << table.failures.size() << " replicate-method runs failed and were excluded\n";
  }
  log << metrics.str();
  return table;
}

TrueValues cmd_truth(const RunConfig& cfg, std::ostream& log) {
  const std::string manifest = manifest_json(cfg, "truth");
  std::filesystem::create_directories(cfg.output_dir);
  const TrueValues truth =
      generate_truth(cfg.plan.params, cfg.plan.truth_datasets,
                     derive_seed(cfg.plan.seed, {stream_tag::kTruth}), cfg.plan.workers);
  std::ostringstream body;
  write_truth_csv(body, truth, comment_for(run_id(manifest)));
  write_file(cfg.output_dir / "manifest.json", manifest);
  write_file(cfg.output_dir / "truth.csv", body.str());
  log << body.str();
  return truth;
}

std::vector<MethodEstimates> analyze_dataset(const TrialDataset& data, const AnalyzeOptions& opts) {
  std::vector<MethodEstimates> out;
  for (Method m : opts.methods) {
    ImputationConfig cfg = opts.imputation;
    cfg.method = m;
    const ImputationResult res = impute(data, cfg);
    out.push_back({m, pool_completed(res.completed, opts.level), res.fallbacks.size()});
  }
  return out;
}

std::vector<MethodEstimates> cmd_analyze(const AnalyzeOptions& opts, std::ostream& log) {
  std::ifstream in(opts.dataset, std::ios::binary);
  if (!in) throw IngestError({"cannot open dataset '" + opts.dataset.string() + "'"});
  std::ostringstream raw;
  raw << in.rdbuf();
  std::istringstream text(raw.str());
  const TrialDataset data = read_dataset_csv(text, opts.dataset.string());
  std::vector<std::string> problems;
  for (const auto& v : validate_dataset(data)) {
    problems.push_back("subject '" + v.subject_id + "': " + v.message);
  }
  if (!problems.empty()) throw IngestError(std::move(problems));

  const ScenarioCounts counts = count_scenarios(data);
  log << "scenario counts (S1 S2 S3 S4_51 S52):\n";
  for (int a = 0; a < 2; ++a) {
    log << (a == 0 ? "  control     " : "  experimental");
    for (int k = 0; k < kScenarioCount; ++k) log << ' ' << counts[a][k];
    log << '\n';
  }

  const auto estimates = analyze_dataset(data, opts);
  std::filesystem::create_directories(opts.output_dir);
  json methods = json::array();
  for (Method m : opts.methods) methods.push_back(std::string(method_name(m)));
  const json manifest = {
      {"tool", "rdimpute"},
      {"version", kVersion},
      {"command", "analyze"},
      {"dataset", opts.dataset.filename().string()},
      {"dataset_hash", run_id(raw.str())},
      {"methods", methods},
      {"seed", opts.imputation.seed},
      {"level", opts.level},
      {"imputation",
       {{"m", opts.imputation.m},
        {"min_donor_pool", opts.imputation.min_donor_pool},
        {"mar_conditioning", conditioning_name(opts.imputation.mar_conditioning)},
        {"rd_conditioning", conditioning_name(opts.imputation.rd_conditioning)},
        {"survival", survival_name(opts.imputation.survival_kind)}}}};
  const std::string manifest_text = manifest.dump(2) + "\n";
  std::ostringstream body;
  write_estimates_csv(body, estimates, comment_for(run_id(manifest_text)));
  write_file(opts.output_dir / "manifest.json", manifest_text);
  write_file(opts.output_dir / "estimates.csv", body.str());
  print_estimates_table(log, estimates);
  for (const auto& e : estimates) {
    if (e.fallbacks) {
      log << "method " << method_name(e.method) << ": " << e.fallbacks
          << " donor-pool fallbacks (arms pooled)\n";
    }
  }
  return estimates;
}

TrialDataset cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_file) {
  TrialDataset data = generate_trial(cfg.plan.params, cfg.plan.seed);
  if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());
  std::ostringstream body;
  write_dataset_csv(body, data);
  write_file(out_file, body.str());
  return data;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple imputation for trials with administrative study withdrawals", "rdimpute"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::optional<std::string> config_path, preset, methods, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps, m_imp, truth_n, workers, min_pool;
  std::string data_path, out_file;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--preset", preset, "setting1 or setting2");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--workers", workers, "worker threads (default: RDIMPUTE_WORKERS or 1)");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "replicated simulation study");
  add_common(simulate);
  simulate->add_option("--reps", reps, "number of simulated trials");
  simulate->add_option("--methods", methods, "comma-separated subset of A,B,C,D");
  simulate->add_option("--m-imputations", m_imp, "imputations per trial");
  simulate->add_option("--truth-datasets", truth_n, "complete datasets for the truth");
  simulate->add_option("--out", out_dir, "output directory");

  CLI::App* truth = app.add_subcommand("truth", "true treatment-policy means");
  add_common(truth);
  truth->add_option("--truth-datasets", truth_n, "complete datasets to average");
  truth->add_option("--out", out_dir, "output directory");

  CLI::App* analyze = app.add_subcommand("analyze", "impute and pool one trial dataset");
  analyze->add_option("--data", data_path, "dataset CSV")->required();
  analyze->add_option("--config", config_path, "JSON run configuration (imputation section)");
  analyze->add_option("--methods", methods, "comma-separated subset of A,B,C,D");
  analyze->add_option("--m-imputations", m_imp, "number of imputations");
  analyze->add_option("--min-donor-pool", min_pool, "smallest per-arm donor pool");
  analyze->add_option("--seed", seed, "imputation seed");
  analyze->add_option("--workers", workers, "worker threads");
  analyze->add_option("--out", out_dir, "output directory");

  CLI::App* generate = app.add_subcommand("generate", "write one simulated trial as CSV");
  add_common(generate);
  generate->add_option("--out", out_file, "dataset CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    Overrides ov;
    ov.preset = preset;
    ov.seed = seed;
    ov.replicates = reps;
    ov.m_imputations = m_imp;
    ov.truth_datasets = truth_n;
    ov.workers = workers;
    if (methods) ov.methods = parse_methods(*methods);
    if (out_dir) ov.output_dir = *out_dir;
    std::optional<std::filesystem::path> cfg_path;
    if (config_path) cfg_path = *config_path;

    if (*simulate) {
      cmd_simulate(load_run_config(cfg_path, ov), out);
    } else if (*truth) {
      cmd_truth(load_run_config(cfg_path, ov), out);
    } else if (*generate) {
      cmd_generate(load_run_config(cfg_path, ov), out_file);
    } else if (*analyze) {
      const RunConfig cfg = load_run_config(cfg_path, ov);
      AnalyzeOptions opts;
      opts.dataset = data_path;
      opts.methods = ov.methods.value_or(std::vector<Method>{Method::A, Method::B, Method::C, Method::D});
      opts.imputation = cfg.plan.imputation;
      opts.imputation.seed = cfg.plan.seed;
      opts.imputation.workers = cfg.plan.workers;
      if (min_pool) opts.imputation.min_donor_pool = *min_pool;
      opts.imputation.validate();
      opts.level = cfg.level;
      opts.output_dir = cfg.output_dir;
      cmd_analyze(opts, out);
    }
  } catch (const IngestError& e) {
    for (const auto& d : e.diagnostics()) err << "error: " << d << '\n';
    return kInputError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace rdimpute::cli
