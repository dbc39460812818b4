#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cbindex/benefit.hpp"
#include "cbindex/nbglm.hpp"
#include "cbindex/trial_data.hpp"

namespace cbindex {

using BenefitPredictor = std::function<BenefitVector(const TrialDataset&)>;

struct TrainedModel {
  BenefitPredictor predict;
  std::optional<double> lambda;                      ///< penalty used, if any
  std::shared_ptr<const FittedBenefitModel> model;  ///< null for non-NB predictors
};

/// A full estimation procedure: raw data in, benefit predictor out. `seed`
/// drives any internal randomness (CV folds); `fixed_lambda`, when set,
/// replaces penalty selection.
struct Pipeline {
  std::function<TrainedModel(const TrialDataset&, std::uint64_t seed, std::optional<double> fixed_lambda)> train;
};

enum class ModelKind { ridge, ml };

struct NbPipelineOptions {
  ModelKind model = ModelKind::ridge;
  int folds = 10;
  int grid_size = 100;
  double grid_ratio = 1e-4;
  CvLoss loss = CvLoss::squared_error;
};

/// Standardize, pick lambda by CV (ridge only), fit with dispersion
/// alternation, predict benefits. Non-converged fits throw NumericalError.
Pipeline make_nb_pipeline(const NbPipelineOptions& options);

struct BootstrapConfig {
  int replicates = 1000;
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  bool refit_shrinkage = true;  ///< rerun penalty selection in every resample
  bool stratify_by_arm = false;
  std::size_t workers = 1;
};

struct IntervalEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> replicate_values;  ///< successful replicates, in replicate order
  std::size_t n_failed = 0;
  bool reliability_warning = false;  ///< more than 20% of replicates failed
};

struct OptimismResult {
  CbEstimate original;
  double optimism = 0.0;
  double adjusted = 0.0;
  std::vector<double> differences;  ///< within - out, successful replicates in order
  std::size_t n_failed = 0;
  bool experimental = false;  ///< set for the parametric estimator
};

/// Nearest-rank percentile: the ceil(q*N)-th smallest value (q in [0, 1]).
double nearest_rank_percentile(std::vector<double> values, double q);

/// Indices of one bootstrap resample of `d` (size n, with replacement).
std::vector<Eigen::Index> bootstrap_indices(const TrialDataset& d, Rng& rng, bool stratify_by_arm);

/// Percentile bootstrap interval for C_b, rerunning the whole pipeline in
/// each resample. Result index 0 is parametric, 1 semi-parametric.
/// `original` reuses an already trained model for the point estimate.
std::array<IntervalEstimate, 2> bootstrap_ci_both(const TrialDataset& d, const Pipeline& pipeline,
                                                  const BootstrapConfig& cfg,
                                                  const TrainedModel* original = nullptr);
IntervalEstimate bootstrap_ci(const TrialDataset& d, const Pipeline& pipeline, EstimatorKind kind,
                              const BootstrapConfig& cfg);

/// Bootstrap optimism: each replicate fits on a resample, scores C_b there
/// (within) and on `d` (out); adjusted = original - mean(within - out).
/// `original` reuses an already trained model for the point estimate. With
/// `refit_shrinkage` off, resamples reuse the original penalty instead of
/// rerunning its selection.
std::array<OptimismResult, 2> optimism_adjust_both(const TrialDataset& d, const Pipeline& pipeline,
                                                   const BootstrapConfig& cfg,
                                                   const TrainedModel* original = nullptr);
OptimismResult optimism_adjust(const TrialDataset& d, const Pipeline& pipeline, EstimatorKind kind,
                               const BootstrapConfig& cfg);

}  // namespace cbindex
