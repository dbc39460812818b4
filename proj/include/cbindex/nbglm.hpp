#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbindex/trial_data.hpp"

namespace cbindex {

/// Negative-binomial rate-model design.
///
/// Columns are ordered [intercept, treatment, X_1..X_m, A*X_1..A*X_m], so a
/// model with m covariates has 2m+2 coefficients. `offset` holds ln(T_i)
/// and is added to the linear predictor, never estimated or penalized.
struct DesignMatrix {
  Eigen::MatrixXd x;
  Eigen::VectorXd offset;
  Eigen::VectorXd response;
  std::vector<std::string> names;
  std::vector<std::string> covariate_names;
  ScalingParams scaling;

  Eigen::Index rows() const noexcept { return x.rows(); }
  Eigen::Index cols() const noexcept { return x.cols(); }
  Eigen::Index covariate_count() const noexcept { return (x.cols() - 2) / 2; }

  DesignMatrix subset(const std::vector<Eigen::Index>& rows) const;
};

/// `standardized` must already be on the model scale; `scaling` records how
/// raw covariates map onto it.
DesignMatrix build_design_matrix(const TrialDataset& standardized, ScalingParams scaling);

/// Standardizes `raw` and builds its design.
DesignMatrix prepare_design(const TrialDataset& raw);

struct IrlsOptions {
  double tolerance = 1e-8;  ///< max absolute coefficient change
  int max_iterations = 100;
};

struct FitDiagnostics {
  int iterations = 0;
  bool converged = false;
  double penalized_deviance = 0.0;
  /// Penalized deviance after every accepted IRLS step (last θ round).
  std::vector<double> deviance_trace;
  int dispersion_rounds = 0;
};

struct FittedBenefitModel {
  Eigen::VectorXd coefficients;
  double theta = 1.0;
  double lambda = 0.0;
  ScalingParams scaling;
  std::vector<std::string> names;
  std::vector<std::string> covariate_names;
  FitDiagnostics fit;

  Eigen::Index covariate_count() const noexcept { return scaling.means.size(); }
};

// NB2 parameterization: variance mu + mu^2 / theta.
double nb_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta);
double nb_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta);

/// Linear predictor including offset, then exponentiated.
Eigen::VectorXd fitted_means(const DesignMatrix& design, const Eigen::VectorXd& coefficients);

/// Penalized IRLS at fixed dispersion. Maximizes the NB log-likelihood minus
/// lambda * sum(beta_j^2) over every coefficient except the intercept.
/// Step-halving keeps the penalized deviance non-increasing. Non-convergence
/// is reported through `fit.converged`; a singular or ill-conditioned system
/// throws NumericalError.
FittedBenefitModel fit(const DesignMatrix& design, double lambda, double theta,
                       const IrlsOptions& options = {}, const Eigen::VectorXd* start = nullptr);

/// Profile maximum-likelihood dispersion for fixed means, searched on log
/// scale over [1e-3, 1e8]. Returns 1e8 when the profile keeps increasing.
double estimate_dispersion(const Eigen::VectorXd& y, const Eigen::VectorXd& mu);
double estimate_dispersion(const DesignMatrix& design, const Eigen::VectorXd& coefficients);

inline constexpr double kMinDispersion = 1e-3;
inline constexpr double kMaxDispersion = 1e8;

struct AlternationOptions {
  IrlsOptions irls;
  double theta_tolerance = 1e-4;  ///< relative change
  int max_rounds = 50;
};

/// Alternates `fit` and `estimate_dispersion` until theta settles.
/// `warm` (optional) seeds both coefficients and theta.
FittedBenefitModel fit_with_dispersion(const DesignMatrix& design, double lambda,
                                       const AlternationOptions& options = {},
                                       const FittedBenefitModel* warm = nullptr);

/// `count` log-spaced values from lambda_max down to lambda_max * ratio.
/// lambda_max is the penalty at which a single ridge step from the
/// intercept-only fit moves no slope by more than 1e-3.
std::vector<double> default_lambda_grid(const DesignMatrix& design, int count = 100, double ratio = 1e-4);

enum class CvLoss { squared_error, deviance };

struct CvResult {
  std::vector<double> lambda_grid;
  std::vector<double> cv_error;
  std::vector<double> cv_se;
  double chosen_lambda = 0.0;
  std::size_t chosen_index = 0;
  std::vector<int> fold_of;  ///< fold id per subject
};

/// K-fold cross-validation stratified by treatment arm. For each fold the
/// grid is walked from largest to smallest lambda with warm starts and
/// theta re-estimated on the training part. Ties go to the larger lambda.
CvResult cross_validate_lambda(const DesignMatrix& design, int folds, std::vector<double> grid,
                               std::uint64_t seed, CvLoss loss = CvLoss::squared_error);

/// Expected event count for one subject given raw covariates.
double predict_rate(const FittedBenefitModel& model, const Eigen::VectorXd& raw_covariates,
                    int treatment, double time);

/// Expected count per unit time for every row of `raw_covariates` under `treatment`.
Eigen::VectorXd predict_unit_rates(const FittedBenefitModel& model, const Eigen::MatrixXd& raw_covariates,
                                   int treatment);

std::string model_to_json(const FittedBenefitModel& model);
FittedBenefitModel model_from_json(const std::string& text);

}  // namespace cbindex
