#include "catch_amalgamated.hpp"

#include <sstream>

#include "rdimpute/datagen.hpp"
#include "rdimpute/io.hpp"

using namespace rdimpute;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<std::string> diagnostics_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_dataset_csv(in);
  } catch (const IngestError& e) {
    return e.diagnostics();
  }
  return {};
}

const char* kHeader = "id,arm,baseline,y12,y24,y36,y48,disc_week,withdraw_week,withdraw_type\n";

}  // namespace

TEST_CASE("shortest round-trip formatting") {
  for (double x : {0.1, 1.0 / 3.0, -1.8, 1e-300, 123456789.125, 0.0}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(48.0) == "48");
}

TEST_CASE("dataset export and ingest round trip") {
  const TrialDataset d = generate_trial("setting1", 31);
  std::ostringstream first;
  write_dataset_csv(first, d);
  std::istringstream in(first.str());
  const TrialDataset back = read_dataset_csv(in);
  REQUIRE(back.subjects.size() == d.subjects.size());
  CHECK(back.grid == d.grid);
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    const auto& a = d.subjects[i];
    const auto& b = back.subjects[i];
    CHECK(a.id == b.id);
    CHECK(a.arm == b.arm);
    CHECK(a.baseline == b.baseline);
    CHECK(a.outcomes == b.outcomes);
    CHECK(a.missing == b.missing);
    CHECK(a.disc_time == b.disc_time);
    CHECK(a.withdraw_time == b.withdraw_time);
    CHECK(a.withdraw_type == b.withdraw_type);
  }
  std::ostringstream second;
  write_dataset_csv(second, back);
  CHECK(first.str() == second.str());
}

TEST_CASE("custom visit grid from the header") {
  std::istringstream in(
      "# exported\n"
      "id,arm,baseline,y4,y26,y52,disc_week,withdraw_week,withdraw_type\n"
      "a,0,8.1,0.1,0.2,0.3,,,\n"
      "\n"
      "b,1,7.9,-0.1,,,,10,admin\n");
  const TrialDataset d = read_dataset_csv(in);
  CHECK(d.grid.weeks() == std::vector<double>{4, 26, 52});
  CHECK(classify_scenario(d.subjects[1], d.grid) == Scenario::s52);
}

TEST_CASE("ingest diagnostics name the row") {
  const auto bad_arm = diagnostics_of(std::string(kHeader) + "1,0,8,1,1,1,1,,,\n2,2,8,1,1,1,1,,,\n");
  REQUIRE(bad_arm.size() == 1);
  CHECK_THAT(bad_arm[0], ContainsSubstring("row 3"));
  CHECK_THAT(bad_arm[0], ContainsSubstring("arm"));

  const auto many = diagnostics_of(std::string(kHeader) + "1,x,8,1,1,1,1,,,\n2,0,abc,1,1,1,1,,,\n3,0,8,1,1,1,,,,admin\n");
  CHECK(many.size() == 3);

  CHECK_FALSE(diagnostics_of("id,arm,baseline,y12,y48,disc_week,withdraw_week,withdraw_type,extra\n").empty());
  CHECK_FALSE(diagnostics_of("id,arm,y12,y48,disc_week,withdraw_week,withdraw_type\n").empty());
  CHECK_FALSE(diagnostics_of(std::string(kHeader) + "1,0,8,1,1,1,1,,,\n1,1,8,1,1,1,1,,,\n").empty());
  CHECK_FALSE(diagnostics_of(std::string(kHeader) + "1,0,8,1,1,1,1,,,maybe\n").empty());
  CHECK_FALSE(diagnostics_of(std::string(kHeader) + "1,0,8,1,1\n").empty());
  CHECK_FALSE(diagnostics_of("").empty());
}

TEST_CASE("report writers") {
  MetricsTable t;
  MetricRow r;
  r.method = Method::B;
  r.estimand = Estimand::difference;
  r.bias = 0.25;
  r.n_used = 3;
  t.rows.push_back(r);
  std::ostringstream m;
  write_metrics_csv(m, t, "run_id=abc");
  CHECK(m.str() == "# run_id=abc\nmethod,estimand,bias,ese,ase,cp,n_used\nB,difference,0.25,0,0,0,3\n");

  std::ostringstream tr;
  write_truth_csv(tr, TrueValues{0.0, -1.5, -1.5, 10});
  CHECK_THAT(tr.str(), ContainsSubstring("difference,-1.5,10"));

  ScenarioSummary s;
  s.mean_count[0] = {1, 2, 3, 4, 5};
  std::ostringstream sc;
  write_scenarios_csv(sc, s);
  CHECK_THAT(sc.str(), ContainsSubstring("arm,statistic,S1,S2,S3,S4_51,S52"));
  CHECK_THAT(sc.str(), ContainsSubstring("control,mean_count,1,2,3,4,5"));
}
