#include "rdimpute/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace rdimpute {

namespace {

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Splits one CSV line; double quotes may enclose a field and "" escapes a quote.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

void write_comment(std::ostream& out, const std::string& comment) {
  if (comment.empty()) return;
  std::istringstream lines(comment);
  std::string line;
  while (std::getline(lines, line)) out << "# " << line << '\n';
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

IngestError::IngestError(std::vector<std::string> diagnostics)
    : std::runtime_error(diagnostics.empty() ? std::string("invalid dataset")
                                             : "invalid dataset: " + diagnostics.front()),
      diagnostics_(std::move(diagnostics)) {}

std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

TrialDataset read_dataset_csv(std::istream& in, const std::string& source) {
  std::vector<std::string> diag;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    header = split_csv(t);
    break;
  }
  if (header.empty()) throw IngestError({source + ": missing header row"});

  std::map<std::string, std::size_t> col;
  std::vector<std::pair<double, std::size_t>> visits;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (!col.emplace(h, c).second) diag.push_back("header: duplicate column '" + h + "'");
    if (h.size() > 1 && h[0] == 'y') {
      if (auto w = parse_number(h.substr(1))) {
        visits.emplace_back(*w, c);
        continue;
      }
    }
    static const std::unordered_set<std::string> known{
        "id", "arm", "baseline", "disc_week", "withdraw_week", "withdraw_type"};
    if (!known.count(h)) diag.push_back("header: unknown column '" + h + "'");
  }
  for (const char* required :
       {"id", "arm", "baseline", "disc_week", "withdraw_week", "withdraw_type"}) {
    if (!col.count(required)) diag.push_back(std::string("header: missing column '") + required + "'");
  }
  if (visits.empty()) diag.push_back("header: no visit columns (y<week>)");
  std::vector<double> weeks;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    if (i > 0 && visits[i].first <= visits[i - 1].first) {
      diag.push_back("header: visit columns must have strictly increasing weeks");
    }
    weeks.push_back(visits[i].first);
  }
  if (!diag.empty()) throw IngestError(std::move(diag));

  TrialDataset data;
  try {
    data.grid = VisitGrid(weeks);
  } catch (const ConfigError& e) {
    throw IngestError({std::string("header: ") + e.what()});
  }
  data.provenance = "ingested from " + source;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = split_csv(t);
    const std::string where = "row " + std::to_string(line_no) + ": ";
    if (cells.size() != header.size()) {
      diag.push_back(where + "expected " + std::to_string(header.size()) + " fields, found " +
                     std::to_string(cells.size()));
      continue;
    }
    const std::size_t before = diag.size();
    auto number = [&](const std::string& name, bool optional) -> std::optional<double> {
      const std::string& cell = cells[col.at(name)];
      if (cell.empty()) {
        if (!optional) diag.push_back(where + name + " is required");
        return std::nullopt;
      }
      auto v = parse_number(cell);
      if (!v) diag.push_back(where + name + " '" + cell + "' is not a number");
      return v;
    };

    SubjectRecord s;
    s.id = cells[col.at("id")];
    if (s.id.empty()) diag.push_back(where + "id is required");
    const std::string& arm = cells[col.at("arm")];
    if (arm == "0") {
      s.arm = Arm::control;
    } else if (arm == "1") {
      s.arm = Arm::experimental;
    } else {
      diag.push_back(where + "arm '" + arm + "' must be 0 or 1");
    }
    s.baseline = number("baseline", false).value_or(0.0);
    for (const auto& [week, c] : visits) {
      const std::string& cell = cells[c];
      if (cell.empty()) {
        s.outcomes.emplace_back();
      } else if (auto v = parse_number(cell)) {
        s.outcomes.emplace_back(*v);
      } else {
        diag.push_back(where + header[c] + " '" + cell + "' is not a number");
        s.outcomes.emplace_back();
      }
      s.missing.push_back(!s.outcomes.back().has_value());
    }
    s.disc_time = number("disc_week", true);
    s.withdraw_time = number("withdraw_week", true);
    const std::string& type = cells[col.at("withdraw_type")];
    if (type == "admin") {
      s.withdraw_type = WithdrawalType::administrative;
    } else if (type == "other") {
      s.withdraw_type = WithdrawalType::other;
    } else if (!type.empty()) {
      diag.push_back(where + "withdraw_type '" + type + "' must be admin, other or empty");
    }
    if (diag.size() == before) {
      for (const auto& v : subject_violations(s, data.grid)) diag.push_back(where + v);
    }
    data.subjects.push_back(std::move(s));
  }
  std::unordered_set<std::string> ids;
  for (const auto& s : data.subjects) {
    if (!s.id.empty() && !ids.insert(s.id).second) diag.push_back("duplicate subject id '" + s.id + "'");
  }
  if (!diag.empty()) throw IngestError(std::move(diag));
  return data;
}

TrialDataset read_dataset_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError({"cannot open '" + path + "'"});
  return read_dataset_csv(in, path);
}

void write_dataset_csv(std::ostream& out, const TrialDataset& data) {
  std::vector<std::string> header{"id", "arm", "baseline"};
  for (double w : data.grid.weeks()) header.push_back("y" + format_double(w));
  header.insert(header.end(), {"disc_week", "withdraw_week", "withdraw_type"});
  out << join(header, ",") << '\n';
  for (const auto& s : data.subjects) {
    std::vector<std::string> row{quote_if_needed(s.id), std::to_string(arm_index(s.arm)),
                                 format_double(s.baseline)};
    for (const auto& y : s.outcomes) row.push_back(y ? format_double(*y) : std::string());
    row.push_back(s.disc_time ? format_double(*s.disc_time) : std::string());
    row.push_back(s.withdraw_time ? format_double(*s.withdraw_time) : std::string());
    row.push_back(!s.withdraw_type ? std::string()
                  : *s.withdraw_type == WithdrawalType::administrative ? "admin"
                                                                       : "other");
    out << join(row, ",") << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const MetricsTable& table,
                       const std::string& header_comment) {
  write_comment(out, header_comment);
  out << "method,estimand,bias,ese,ase,cp,n_used\n";
  for (const auto& r : table.rows) {
    out << method_name(r.method) << ',' << estimand_name(r.estimand) << ','
        << format_double(r.bias) << ',' << format_double(r.ese) << ',' << format_double(r.ase)
        << ',' << format_double(r.cp) << ',' << r.n_used << '\n';
  }
}

void write_scenarios_csv(std::ostream& out, const ScenarioSummary& summary,
                         const std::string& header_comment) {
  write_comment(out, header_comment);
  out << "arm,statistic";
  for (int k = 0; k < kScenarioCount; ++k) out << ',' << scenario_name(static_cast<Scenario>(k));
  out << '\n';
  for (int a = 0; a < 2; ++a) {
    const char* arm = a == 0 ? "control" : "experimental";
    out << arm << ",mean_count";
    for (int k = 0; k < kScenarioCount; ++k) out << ',' << format_double(summary.mean_count[a][k]);
    out << '\n' << arm << ",percent";
    for (int k = 0; k < kScenarioCount; ++k) out << ',' << format_double(summary.percent[a][k]);
    out << '\n';
  }
}

void write_truth_csv(std::ostream& out, const TrueValues& truth,
                     const std::string& header_comment) {
  write_comment(out, header_comment);
  out << "estimand,value,n_datasets\n"
      << "control," << format_double(truth.mean_control) << ',' << truth.n_datasets << '\n'
      << "treatment," << format_double(truth.mean_treatment) << ',' << truth.n_datasets << '\n'
      << "difference," << format_double(truth.difference) << ',' << truth.n_datasets << '\n';
}

void write_estimates_csv(std::ostream& out, const std::vector<MethodEstimates>& estimates,
                         const std::string& header_comment) {
  write_comment(out, header_comment);
  out << "method,group,mean,se,ci_lower,ci_upper,df\n";
  for (const auto& e : estimates) {
    const std::pair<const char*, const PooledEstimate*> groups[] = {
        {"control", &e.pooled.control},
        {"treatment", &e.pooled.treatment},
        {"difference", &e.pooled.difference}};
    for (const auto& [name, p] : groups) {
      out << method_name(e.method) << ',' << name << ',' << format_double(p->point) << ','
          << format_double(p->se()) << ',' << format_double(p->lower) << ','
          << format_double(p->upper) << ',' << format_double(p->df) << '\n';
    }
  }
}

void print_estimates_table(std::ostream& out, const std::vector<MethodEstimates>& estimates) {
  out << std::left << std::setw(8) << "Method" << std::setw(20) << "Control" << std::setw(20)
      << "Treatment" << "Difference\n";
  out << std::setw(8) << "" << std::setw(20) << "Mean (SE)" << std::setw(20) << "Mean (SE)"
      << "Mean (" << std::lround(100 * (estimates.empty() ? 0.95 : estimates.front().pooled.difference.level))
      << "% CI)\n";
  char buf[128];
  for (const auto& e : estimates) {
    const auto& c = e.pooled.control;
    const auto& t = e.pooled.treatment;
    const auto& d = e.pooled.difference;
    out << std::setw(8) << method_name(e.method);
    std::snprintf(buf, sizeof buf, "%.3f (%.3f)", c.point, c.se());
    out << std::setw(20) << buf;
    std::snprintf(buf, sizeof buf, "%.3f (%.3f)", t.point, t.se());
    out << std::setw(20) << buf;
    std::snprintf(buf, sizeof buf, "%.3f (%.3f, %.3f)", d.point, d.lower, d.upper);
    out << buf << '\n';
  }
}

}  // namespace rdimpute
