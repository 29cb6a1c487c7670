#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rdimpute {

/// Raised when a record or dataset breaks a structural invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid parameters, presets or configuration documents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Assessment weeks t_1 < ... < t_K; the study duration is t_K.
class VisitGrid {
 public:
  /// Weeks 12, 24, 36 and 48.
  VisitGrid();
  explicit VisitGrid(std::vector<double> weeks);

  const std::vector<double>& weeks() const noexcept { return weeks_; }
  std::size_t size() const noexcept { return weeks_.size(); }
  double operator[](std::size_t k) const { return weeks_[k]; }
  double duration() const noexcept { return weeks_.back(); }
  std::size_t endpoint_index() const noexcept { return weeks_.size() - 1; }

  friend bool operator==(const VisitGrid&, const VisitGrid&) = default;

 private:
  std::vector<double> weeks_;
};

enum class Arm : int { control = 0, experimental = 1 };

inline int arm_index(Arm a) noexcept { return static_cast<int>(a); }

enum class WithdrawalType : int { other = 0, administrative = 1 };

/// One subject. Visit-indexed vectors have one entry per grid visit.
struct SubjectRecord {
  std::string id;
  Arm arm = Arm::control;
  double baseline = 0.0;
  /// Change from baseline; engaged iff the visit is observed.
  std::vector<std::optional<double>> outcomes;
  /// True iff the visit outcome is missing.
  std::vector<bool> missing;
  /// Time of normal real-world-like treatment discontinuation.
  std::optional<double> disc_time;
  std::optional<double> withdraw_time;
  std::optional<WithdrawalType> withdraw_type;

  bool endpoint_observed() const { return !missing.empty() && !missing.back(); }
  double endpoint() const { return *outcomes.back(); }
};

enum class Scenario : int { s1 = 0, s2, s3, s4_51, s52 };

inline constexpr int kScenarioCount = 5;

std::string_view scenario_name(Scenario s) noexcept;

struct TrialDataset {
  VisitGrid grid;
  std::vector<SubjectRecord> subjects;
  std::string provenance;
};

/// Builds a record from a per-visit outcome vector; missing flags follow the outcomes.
SubjectRecord make_subject(std::string id, Arm arm, double baseline,
                           std::vector<std::optional<double>> outcomes,
                           std::optional<double> disc_time = std::nullopt,
                           std::optional<double> withdraw_time = std::nullopt,
                           std::optional<WithdrawalType> withdraw_type = std::nullopt);

/// Lists every invariant the record violates; empty when valid.
std::vector<std::string> subject_violations(const SubjectRecord& subject, const VisitGrid& grid);

/// Maps a record to its missing-data scenario. Throws ValidationError on an inconsistent record.
///
/// The label depends only on the endpoint missing flag, the discontinuation time U, the
/// withdrawal time V and the withdrawal type D:
///   - endpoint observed: S3 if U < d, else S1;
///   - U < d and (V absent, V >= d, or U < V): S4_51 (discontinued first);
///   - V < d with U absent or U == V: S52 if administrative, else S4_51;
///   - otherwise (missing for logistic reasons, no withdrawal before d): S2.
/// A withdrawal with no recorded type counts as non-administrative.
Scenario classify_scenario(const SubjectRecord& subject, const VisitGrid& grid);

struct Violation {
  std::size_t subject_index;
  std::string subject_id;
  std::string message;
};

std::vector<Violation> validate_dataset(const TrialDataset& data);

/// Scenario label of every subject, in dataset order. Throws on the first invalid record.
std::vector<Scenario> classify_all(const TrialDataset& data);

}  // namespace rdimpute
