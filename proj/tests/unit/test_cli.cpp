#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdimpute/cli.hpp"

using namespace rdimpute;
using namespace rdimpute::cli;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rdimpute_cli_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_args(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "rdimpute");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("config documents") {
  const RunConfig d = parse_run_config("");
  CHECK(d.plan.imputation.m == 100);
  CHECK(d.plan.n_replicates == 1000);

  const RunConfig c = parse_run_config(R"({
    "preset": "setting2",
    "seed": 9,
    "params": {"n_per_arm": 50, "kappa": 0.1},
    "plan": {"replicates": 20, "methods": ["B", "C"]},
    "imputation": {"m": 7, "rd_conditioning": "monotone_sequential", "survival": "covariate_free"}
  })");
  CHECK(c.plan.params.alpha1 == 0.0);
  CHECK(c.plan.params.withdrawal_rate == 0.005);
  CHECK(c.plan.params.n_per_arm == 50);
  CHECK(c.plan.params.kappa == 0.1);
  CHECK(c.plan.seed == 9);
  CHECK(c.plan.methods == std::vector<Method>{Method::B, Method::C});
  CHECK(c.plan.imputation.m == 7);
  CHECK(c.plan.imputation.rd_conditioning == Conditioning::monotone_sequential);
  CHECK(c.plan.imputation.survival_kind == SurvivalKind::covariate_free);

  Overrides ov;
  ov.seed = 11;
  ov.replicates = 3;
  ov.preset = "setting1";
  const RunConfig o = parse_run_config(R"({"preset": "setting2", "seed": 9})", ov);
  CHECK(o.plan.seed == 11);
  CHECK(o.plan.n_replicates == 3);
  CHECK(o.plan.params.alpha1 == 1.5);
}

TEST_CASE("config diagnostics") {
  CHECK_THROWS_WITH(parse_run_config(R"({"params": {"kapa": 1}})"), ContainsSubstring("params.kapa"));
  CHECK_THROWS_WITH(parse_run_config(R"({"plan": {"replicates": "ten"}})"),
                    ContainsSubstring("plan.replicates"));
  CHECK_THROWS_WITH(parse_run_config("{\n  \"seed\": 1,\n  oops\n}"), ContainsSubstring("line 3"));
  CHECK_THROWS_AS(parse_run_config(R"({"params": {"kappa": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"preset": "setting7"})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"imputation": {"m": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_methods("B,Q"), ConfigError);
  CHECK(parse_methods("D,b,D") == std::vector<Method>{Method::D, Method::B});
}

TEST_CASE("manifest identity ignores worker count") {
  Overrides a, b;
  a.workers = 1;
  b.workers = 6;
  const std::string ma = manifest_json(parse_run_config("", a), "simulate");
  const std::string mb = manifest_json(parse_run_config("", b), "simulate");
  CHECK(ma == mb);
  CHECK(run_id(ma).size() == 16);
  Overrides c;
  c.seed = 2;
  CHECK(run_id(manifest_json(parse_run_config("", c), "simulate")) != run_id(ma));
}

TEST_CASE("analyze on an exported trial matches the in-memory pipeline") {
  const auto dir = scratch("analyze");
  Overrides ov;
  ov.preset = "setting1";
  ov.seed = 77;
  const RunConfig cfg = parse_run_config("", ov);
  const TrialDataset data = cmd_generate(cfg, dir / "trial.csv");

  AnalyzeOptions opts;
  opts.dataset = dir / "trial.csv";
  opts.imputation.m = 6;
  opts.imputation.seed = 5;
  opts.output_dir = dir;
  std::ostringstream log;
  const auto from_file = cmd_analyze(opts, log);
  const auto in_memory = analyze_dataset(data, opts);
  REQUIRE(from_file.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(from_file[i].pooled.difference.point == in_memory[i].pooled.difference.point);
    CHECK(from_file[i].pooled.difference.total == in_memory[i].pooled.difference.total);
    CHECK(from_file[i].pooled.control.point == in_memory[i].pooled.control.point);
    CHECK(from_file[i].pooled.treatment.lower == in_memory[i].pooled.treatment.lower);
  }
  CHECK_THAT(slurp(dir / "estimates.csv"), ContainsSubstring("method,group,mean,se,ci_lower,ci_upper,df"));
  CHECK_THAT(log.str(), ContainsSubstring("Mean (95% CI)"));
}

TEST_CASE("analyze without missing endpoints") {
  const auto dir = scratch("complete");
  TrialDataset d;
  for (int i = 0; i < 20; ++i) {
    const double y = 0.1 * i;
    d.subjects.push_back(make_subject(std::to_string(i), i % 2 ? Arm::experimental : Arm::control,
                                      7.0 + 0.1 * i, {y, y, y, y}, i % 5 == 0 ? std::optional<double>(12.0) : std::nullopt));
  }
  AnalyzeOptions opts;
  opts.imputation.m = 3;
  const auto est = analyze_dataset(d, opts);
  for (const auto& e : est) {
    CHECK(e.pooled.difference.point == est[0].pooled.difference.point);
    CHECK(e.pooled.difference.between == 0.0);
    CHECK(e.pooled.difference.total == est[0].pooled.difference.total);
  }
}

TEST_CASE("simulate and truth write tagged outputs") {
  const auto dir = scratch("simulate");
  Overrides ov;
  ov.preset = "setting2";
  ov.replicates = 3;
  ov.m_imputations = 3;
  ov.truth_datasets = 20;
  ov.methods = std::vector<Method>{Method::B, Method::C};
  ov.output_dir = dir;
  const RunConfig cfg = parse_run_config("", ov);
  std::ostringstream log;
  cmd_simulate(cfg, log);
  const std::string metrics = slurp(dir / "metrics.csv");
  const std::string id = run_id(slurp(dir / "manifest.json"));
  CHECK_THAT(metrics, ContainsSubstring("# run_id=" + id));
  CHECK_THAT(metrics, ContainsSubstring("B,difference"));
  CHECK_THAT(metrics, !ContainsSubstring("A,control"));
  CHECK_THAT(slurp(dir / "scenarios.csv"), ContainsSubstring("# run_id=" + id));
  CHECK_THAT(slurp(dir / "truth.csv"), ContainsSubstring("# run_id=" + id));

  cmd_simulate(cfg, log);
  CHECK(slurp(dir / "metrics.csv") == metrics);

  Overrides t;
  t.truth_datasets = 1;
  t.output_dir = dir / "truth";
  const TrueValues tv = cmd_truth(parse_run_config("", t), log);
  CHECK(tv.n_datasets == 1);
  CHECK(std::filesystem::exists(dir / "truth" / "truth.csv"));
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  std::string out, err;
  CHECK(run_args({"--help"}, &out) == kOk);
  CHECK(run_args({"simulate", "--methods", "Z"}, nullptr, &err) == kInputError);
  CHECK_THAT(err, ContainsSubstring("unknown method"));
  CHECK(run_args({"frobnicate"}) == kInputError);
  CHECK(run_args({"analyze", "--data", (dir / "nope.csv").string()}, nullptr, &err) == kInputError);

  {
    std::ofstream f(dir / "bad.csv");
    f << "id,arm,baseline,y12,y48,disc_week,withdraw_week,withdraw_type\n1,3,8,1,1,,,\n";
  }
  CHECK(run_args({"analyze", "--data", (dir / "bad.csv").string()}, nullptr, &err) == kInputError);
  CHECK_THAT(err, ContainsSubstring("row 2"));

  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"plan": {"replicates": 2, "truth_datasets": 5}, "imputation": {"m": 2}, "unknown": 1})";
  }
  CHECK(run_args({"simulate", "--config", (dir / "cfg.json").string()}, nullptr, &err) == kInputError);
  CHECK_THAT(err, ContainsSubstring("unknown"));

  CHECK(run_args({"generate", "--seed", "3", "--out", (dir / "g.csv").string()}) == kOk);
  CHECK(run_args({"analyze", "--data", (dir / "g.csv").string(), "--m-imputations", "2", "--methods", "C",
                  "--out", dir.string()},
                 &out) == kOk);
  CHECK_THAT(out, ContainsSubstring("scenario counts"));
}
