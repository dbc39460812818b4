#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cbindex {

struct SubjectRecord {
  std::string id;
  int treatment = 0;
  double events = 0.0;
  double time = 1.0;
  Eigen::VectorXd covariates;
};

/// Two-arm trial data stored column-wise.
///
/// Row i holds subject i: `treatment(i)` in {0, 1}, a non-negative integer
/// event count, positive follow-up time in years, and one row of `covariates`.
/// Both-arm presence is checked by the consumers that need it
/// (`require_both_arms`), so a single-arm file can still be loaded and
/// reported as an undefined estimate rather than a parse failure.
class TrialDataset {
 public:
  TrialDataset() = default;
  /// Empty `ids` means subjects are named by row number from 1.
  TrialDataset(std::vector<std::string> ids, Eigen::VectorXi treatment, Eigen::VectorXd events,
               Eigen::VectorXd time, Eigen::MatrixXd covariates,
               std::vector<std::string> covariate_names);

  static TrialDataset from_records(const std::vector<SubjectRecord>& records,
                                   std::vector<std::string> covariate_names);

  Eigen::Index size() const noexcept { return treatment_.size(); }
  Eigen::Index covariate_count() const noexcept { return covariates_.cols(); }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Eigen::VectorXi& treatment() const noexcept { return treatment_; }
  const Eigen::VectorXd& events() const noexcept { return events_; }
  const Eigen::VectorXd& time() const noexcept { return time_; }
  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }

  SubjectRecord subject(Eigen::Index i) const;

  Eigen::Index arm_size(int arm) const;
  /// Throws EstimatorUndefinedError naming the empty arm.
  void require_both_arms() const;

  /// Rows picked by `rows` (duplicates allowed), in that order.
  TrialDataset select(const std::vector<Eigen::Index>& rows) const;
  TrialDataset with_covariates(Eigen::MatrixXd covariates) const;
  TrialDataset with_treatment(Eigen::VectorXi treatment) const;

 private:
  void validate() const;

  std::vector<std::string> ids_;
  Eigen::VectorXi treatment_;
  Eigen::VectorXd events_;
  Eigen::VectorXd time_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> covariate_names_;
};

struct ScalingParams {
  Eigen::VectorXd means;
  Eigen::VectorXd sds;

  /// Maps raw covariate rows into the standardized space.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

/// Column-to-role mapping for CSV input. An empty `id` means row numbers are used.
struct ColumnSchema {
  std::string id;
  std::string treatment = "treatment";
  std::string events = "events";
  std::string time = "time";
  std::vector<std::string> covariates;
};

struct LoadResult {
  TrialDataset dataset;
  std::size_t dropped_incomplete = 0;
};

/// Parses a header-first comma-separated stream. Rows with an empty or
/// `NA` field in any mapped column are dropped and counted.
LoadResult load_dataset(std::istream& source, const ColumnSchema& schema);
LoadResult load_dataset_file(const std::string& path, const ColumnSchema& schema);
/// Column names from the first line of a CSV file.
std::vector<std::string> read_csv_header(const std::string& path);

/// Returns the dataset with every covariate column scaled to sample mean 0
/// and sample SD 1 (divisor n-1). Never reads the treatment column.
std::pair<TrialDataset, ScalingParams> standardize(const TrialDataset& d);

struct CovariateBalance {
  std::string name;
  std::optional<double> smd;  ///< empty when the covariate is constant
  bool flagged = false;
};

/// Absolute standardized mean difference between arms for each covariate.
std::vector<CovariateBalance> balance_check(const TrialDataset& d, double threshold = 0.05);

}  // namespace cbindex
