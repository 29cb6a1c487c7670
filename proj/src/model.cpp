#include "rdimpute/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace rdimpute {

VisitGrid::VisitGrid() : weeks_{12.0, 24.0, 36.0, 48.0} {}

VisitGrid::VisitGrid(std::vector<double> weeks) : weeks_(std::move(weeks)) {
  if (weeks_.empty()) throw ConfigError("visit grid must contain at least one visit");
  double prev = 0.0;
  for (double w : weeks_) {
    if (!std::isfinite(w) || w <= prev) {
      throw ConfigError("visit weeks must be positive and strictly increasing");
    }
    prev = w;
  }
}

std::string_view scenario_name(Scenario s) noexcept {
  switch (s) {
    case Scenario::s1: return "S1";
    case Scenario::s2: return "S2";
    case Scenario::s3: return "S3";
    case Scenario::s4_51: return "S4_51";
    case Scenario::s52: return "S52";
  }
  return "?";
}

SubjectRecord make_subject(std::string id, Arm arm, double baseline,
                           std::vector<std::optional<double>> outcomes,
                           std::optional<double> disc_time, std::optional<double> withdraw_time,
                           std::optional<WithdrawalType> withdraw_type) {
  SubjectRecord s;
  s.id = std::move(id);
  s.arm = arm;
  s.baseline = baseline;
  s.missing.reserve(outcomes.size());
  for (const auto& y : outcomes) s.missing.push_back(!y.has_value());
  s.outcomes = std::move(outcomes);
  s.disc_time = disc_time;
  s.withdraw_time = withdraw_time;
  s.withdraw_type = withdraw_type;
  return s;
}

std::vector<std::string> subject_violations(const SubjectRecord& s, const VisitGrid& grid) {
  std::vector<std::string> out;
  const double d = grid.duration();
  if (s.arm != Arm::control && s.arm != Arm::experimental) out.emplace_back("arm must be 0 or 1");
  if (!std::isfinite(s.baseline)) out.emplace_back("baseline is not finite");
  if (s.outcomes.size() != grid.size() || s.missing.size() != grid.size()) {
    out.emplace_back("visit vectors do not match the grid size");
    return out;
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::ostringstream week;
    week << grid[k];
    if (s.outcomes[k].has_value() == s.missing[k]) {
      out.push_back("week " + week.str() + ": outcome presence disagrees with missing flag");
    }
    if (s.outcomes[k] && !std::isfinite(*s.outcomes[k])) {
      out.push_back("week " + week.str() + ": outcome is not finite");
    }
  }
  if (s.disc_time && !(*s.disc_time >= 0.0 && *s.disc_time <= d)) {
    out.emplace_back("discontinuation time outside [0, d]");
  }
  if (s.withdraw_time && !(*s.withdraw_time >= 0.0 && *s.withdraw_time <= d)) {
    out.emplace_back("withdrawal time outside [0, d]");
  }
  if (s.withdraw_type && !s.withdraw_time) {
    out.emplace_back("withdrawal type recorded without a withdrawal time");
  }
  if (s.disc_time && s.withdraw_time && *s.disc_time > *s.withdraw_time) {
    out.emplace_back("discontinuation recorded after study withdrawal");
  }
  if (s.withdraw_time) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (grid[k] > *s.withdraw_time && !s.missing[k]) {
        std::ostringstream msg;
        msg << "week " << grid[k] << ": outcome observed after withdrawal";
        out.push_back(msg.str());
      }
    }
  }
  return out;
}

Scenario classify_scenario(const SubjectRecord& s, const VisitGrid& grid) {
  if (auto v = subject_violations(s, grid); !v.empty()) {
    throw ValidationError("subject '" + s.id + "': " + v.front());
  }
  const double d = grid.duration();
  const bool discontinued = s.disc_time && *s.disc_time < d;
  if (s.endpoint_observed()) return discontinued ? Scenario::s3 : Scenario::s1;

  const bool withdrew = s.withdraw_time && *s.withdraw_time < d;
  if (discontinued && (!withdrew || *s.disc_time < *s.withdraw_time)) return Scenario::s4_51;
  if (withdrew) {
    const bool admin = s.withdraw_type == WithdrawalType::administrative;
    return admin ? Scenario::s52 : Scenario::s4_51;
  }
  return Scenario::s2;
}

std::vector<Violation> validate_dataset(const TrialDataset& data) {
  std::vector<Violation> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& s = data.subjects[i];
    if (!seen.insert(s.id).second) out.push_back({i, s.id, "duplicate subject id"});
    for (auto& msg : subject_violations(s, data.grid)) out.push_back({i, s.id, std::move(msg)});
  }
  return out;
}

std::vector<Scenario> classify_all(const TrialDataset& data) {
  std::vector<Scenario> out;
  out.reserve(data.subjects.size());
  for (const auto& s : data.subjects) out.push_back(classify_scenario(s, data.grid));
  return out;
}

}  // namespace rdimpute
