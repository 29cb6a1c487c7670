#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rdimpute/cli.hpp"
#include "rdimpute/io.hpp"
#include "rdimpute/version.hpp"

namespace py = pybind11;
using namespace rdimpute;

namespace {

std::vector<Method> methods_from(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

py::dict pooled_dict(const PooledEstimate& p) {
  py::dict d;
  d["estimate"] = p.point;
  d["se"] = p.se();
  d["within"] = p.within;
  d["between"] = p.between;
  d["total"] = p.total;
  d["df"] = p.df;
  d["lower"] = p.lower;
  d["upper"] = p.upper;
  d["m"] = p.m;
  return d;
}

py::dict truth_dict(const TrueValues& t) {
  py::dict d;
  d["control"] = t.mean_control;
  d["treatment"] = t.mean_treatment;
  d["difference"] = t.difference;
  d["n_datasets"] = t.n_datasets;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiple imputation for trials with administrative study withdrawals";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IngestError>(m, "IngestError", PyExc_ValueError);
  py::register_exception<ImputationError>(m, "ImputationError", PyExc_RuntimeError);
  py::register_exception<SurvivalError>(m, "SurvivalError", PyExc_RuntimeError);

  py::class_<GenParams>(m, "GenParams")
      .def(py::init<>())
      .def_readwrite("n_per_arm", &GenParams::n_per_arm)
      .def_readwrite("theta", &GenParams::theta)
      .def_readwrite("beta0", &GenParams::beta0)
      .def_readwrite("beta1", &GenParams::beta1)
      .def_readwrite("mu_x", &GenParams::mu_x)
      .def_readwrite("kappa", &GenParams::kappa)
      .def_readwrite("sigma_s2", &GenParams::sigma_s2)
      .def_readwrite("sigma_e2", &GenParams::sigma_e2)
      .def_readwrite("alpha0", &GenParams::alpha0)
      .def_readwrite("alpha1", &GenParams::alpha1)
      .def_readwrite("dropout_extra", &GenParams::dropout_extra)
      .def_readwrite("withdrawal_rate", &GenParams::withdrawal_rate)
      .def_readwrite("washout_weeks", &GenParams::washout_weeks)
      .def_readwrite("p_miss_completer", &GenParams::p_miss_completer)
      .def_readwrite("p_miss_retained_dropout", &GenParams::p_miss_retained_dropout)
      .def_property(
          "visit_weeks", [](const GenParams& p) { return p.grid.weeks(); },
          [](GenParams& p, std::vector<double> w) { p.grid = VisitGrid(std::move(w)); })
      .def("validate", &GenParams::validate);
  m.def("preset_params", [](const std::string& name) { return preset_params(name); }, py::arg("name"));

  py::class_<SubjectRecord>(m, "SubjectRecord")
      .def_readonly("id", &SubjectRecord::id)
      .def_property_readonly("arm", [](const SubjectRecord& s) { return arm_index(s.arm); })
      .def_readonly("baseline", &SubjectRecord::baseline)
      .def_readonly("outcomes", &SubjectRecord::outcomes)
      .def_readonly("disc_time", &SubjectRecord::disc_time)
      .def_readonly("withdraw_time", &SubjectRecord::withdraw_time)
      .def_property_readonly("administrative", [](const SubjectRecord& s) {
        return s.withdraw_type == WithdrawalType::administrative;
      });

  py::class_<TrialDataset>(m, "TrialDataset")
      .def_readonly("subjects", &TrialDataset::subjects)
      .def_readonly("provenance", &TrialDataset::provenance)
      .def_property_readonly("visit_weeks", [](const TrialDataset& d) { return d.grid.weeks(); })
      .def("__len__", [](const TrialDataset& d) { return d.subjects.size(); })
      .def("to_csv", [](const TrialDataset& d) {
        std::ostringstream out;
        write_dataset_csv(out, d);
        return out.str();
      })
      .def("scenarios", [](const TrialDataset& d) {
        std::vector<std::string> out;
        for (Scenario s : classify_all(d)) out.emplace_back(scenario_name(s));
        return out;
      })
      .def("violations", [](const TrialDataset& d) {
        std::vector<std::string> out;
        for (const auto& v : validate_dataset(d)) out.push_back(v.subject_id + ": " + v.message);
        return out;
      });

  m.def("generate_trial", [](const std::string& preset, std::uint64_t seed) { return generate_trial(preset, seed); },
        py::arg("preset"), py::arg("seed"));
  m.def("generate_trial", [](const GenParams& p, std::uint64_t seed) { return generate_trial(p, seed); },
        py::arg("params"), py::arg("seed"));
  m.def("read_dataset_csv", [](const std::string& text) {
    std::istringstream in(text);
    return read_dataset_csv(in);
  }, py::arg("text"), "Parse dataset CSV text.");
  m.def("load_dataset", &read_dataset_csv_file, py::arg("path"));

  m.def("generate_truth", [](const GenParams& p, int n, std::uint64_t seed, int workers) {
    py::gil_scoped_release release;
    const TrueValues t = generate_truth(p, n, seed, workers);
    py::gil_scoped_acquire acquire;
    return truth_dict(t);
  }, py::arg("params"), py::arg("n_datasets") = 20000, py::arg("seed") = 1, py::arg("workers") = 1);

  m.def("analyze", [](const TrialDataset& d, const std::vector<std::string>& methods, int m_imp,
                      std::uint64_t seed, double level, int min_donor_pool) {
    cli::AnalyzeOptions opts;
    opts.methods = methods_from(methods);
    opts.imputation.m = m_imp;
    opts.imputation.seed = seed;
    opts.imputation.min_donor_pool = min_donor_pool;
    opts.level = level;
    std::vector<MethodEstimates> est;
    {
      py::gil_scoped_release release;
      est = cli::analyze_dataset(d, opts);
    }
    py::list out;
    for (const auto& e : est) {
      py::dict row;
      row["method"] = std::string(method_name(e.method));
      row["control"] = pooled_dict(e.pooled.control);
      row["treatment"] = pooled_dict(e.pooled.treatment);
      row["difference"] = pooled_dict(e.pooled.difference);
      row["fallbacks"] = e.fallbacks;
      out.append(row);
    }
    return out;
  }, py::arg("dataset"), py::arg("methods") = std::vector<std::string>{"A", "B", "C", "D"},
     py::arg("m") = 100, py::arg("seed") = 0, py::arg("level") = 0.95, py::arg("min_donor_pool") = 5);

  m.def("simulate", [](const GenParams& p, int replicates, int m_imp, std::uint64_t seed,
                       const std::vector<std::string>& methods, int truth_datasets, int workers) {
    SimPlan plan;
    plan.params = p;
    plan.n_replicates = replicates;
    plan.imputation.m = m_imp;
    plan.seed = seed;
    plan.methods = methods_from(methods);
    plan.truth_datasets = truth_datasets;
    plan.workers = workers;
    MetricsTable t;
    {
      py::gil_scoped_release release;
      t = run_plan(plan);
    }
    py::list rows;
    for (const auto& r : t.rows) {
      py::dict row;
      row["method"] = std::string(method_name(r.method));
      row["estimand"] = std::string(estimand_name(r.estimand));
      row["bias"] = r.bias;
      row["ese"] = r.ese;
      row["ase"] = r.ase;
      row["cp"] = r.cp;
      row["n_used"] = r.n_used;
      rows.append(row);
    }
    py::dict scen;
    for (int a = 0; a < 2; ++a) {
      py::dict arm;
      for (int k = 0; k < kScenarioCount; ++k) {
        arm[py::str(std::string(scenario_name(static_cast<Scenario>(k))))] = t.scenarios.mean_count[a][k];
      }
      scen[a == 0 ? "control" : "experimental"] = arm;
    }
    py::dict out;
    out["rows"] = rows;
    out["truth"] = truth_dict(t.truth);
    out["scenarios"] = scen;
    out["failures"] = t.failures.size();
    return out;
  }, py::arg("params"), py::arg("replicates") = 1000, py::arg("m") = 100, py::arg("seed") = 1,
     py::arg("methods") = std::vector<std::string>{"A", "B", "C", "D"}, py::arg("truth_datasets") = 20000,
     py::arg("workers") = 1);

  m.def("pool_rubin", [](const std::vector<double>& points, const std::vector<double>& variances,
                         double level, double complete_df) {
    if (points.size() != variances.size()) throw py::value_error("points and variances differ in length");
    std::vector<PointVariance> e;
    for (std::size_t i = 0; i < points.size(); ++i) e.push_back({points[i], variances[i]});
    return pooled_dict(pool_rubin(e, level, complete_df));
  }, py::arg("points"), py::arg("variances"), py::arg("level") = 0.95,
     py::arg("complete_df") = std::numeric_limits<double>::infinity());

  m.def("conditional_disc_probability", &conditional_disc_probability, py::arg("survival_at_withdrawal"),
        py::arg("survival_at_end"));
}
