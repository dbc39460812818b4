#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbindex/benefit.hpp"
#include "cbindex/inference.hpp"
#include "cbindex/trial_data.hpp"

namespace cbindex {

struct CovariateLaw {
  enum class Kind { bernoulli, standard_normal };
  std::string name;
  Kind kind = Kind::standard_normal;
  double probability = 0.5;  ///< bernoulli only
};

/// Sex, age, prior hospitalization, prior corticosteroids, FEV1, SGRQ:
/// independent Bernoulli(0.5/0.3/0.5) indicators and standard normals.
std::vector<CovariateLaw> default_covariate_laws();

enum class FollowUp { fixed_one_year, uniform_half_to_one };

/// Data-generating process for simulated trials.
///
/// `coefficients` use the design layout [intercept, treatment, main effects,
/// interactions]. When `constant_benefit_reference` is set, `coefficients`
/// are ignored and outcomes do not depend on covariates at all: every
/// individual has the population mean untreated rate and the population mean
/// benefit of the reference coefficients.
struct Scenario {
  std::string name;
  Eigen::VectorXd coefficients;
  double theta = 1.0;
  std::vector<CovariateLaw> covariates = default_covariate_laws();
  FollowUp followup = FollowUp::fixed_one_year;
  std::optional<Eigen::VectorXd> constant_benefit_reference;
};

/// Maximum-likelihood coefficients of the case-study model.
Eigen::VectorXd strong_interaction_coefficients();
/// Ridge coefficients of the case-study model.
Eigen::VectorXd weak_interaction_coefficients();

Scenario strong_scenario();
Scenario weak_scenario();
Scenario null_scenario();
/// "strong", "weak" or "null"; anything else throws ConfigError.
Scenario scenario_by_name(const std::string& name);

struct Population {
  Eigen::MatrixXd covariates;  ///< standardized, one row per individual
  Eigen::VectorXd untreated_rate;
  Eigen::VectorXd treated_rate;
  Eigen::VectorXd benefit;  ///< untreated_rate - treated_rate
  std::vector<std::string> covariate_names;
};

Population generate_population(const Scenario& s, Eigen::Index size, std::uint64_t seed);

/// C_b of the true benefit distribution.
CbEstimate population_cb(const Population& pop);

/// One simulated trial of n subjects drawn from `pop` with 1:1 randomization.
TrialDataset simulate_trial(const Scenario& s, const Population& pop, Eigen::Index n, Rng& rng);

enum class SimEstimator {
  parametric_ridge,
  parametric_ml,
  semi_ridge,
  semi_ml,
  semi_ridge_adjusted,
  semi_ml_adjusted,
};

inline constexpr std::array<SimEstimator, 6> kSimEstimators{
    SimEstimator::parametric_ridge, SimEstimator::parametric_ml,       SimEstimator::semi_ridge,
    SimEstimator::semi_ml,          SimEstimator::semi_ridge_adjusted, SimEstimator::semi_ml_adjusted};

const char* to_string(SimEstimator e);

struct SimulationOptions {
  std::vector<int> sizes{400, 1000, 5000};
  int replicates = 1000;
  std::uint64_t seed = 0;
  Eigen::Index population_size = 1000000;
  int optimism_replicates = 200;
  bool optimism_refit_shrinkage = true;
  NbPipelineOptions ridge{};
  std::size_t workers = 1;
};

struct SimulationRow {
  std::string scenario;
  int n = 0;
  SimEstimator estimator = SimEstimator::parametric_ridge;
  double oracle = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;  ///< population formula (divisor = replicates used)
  double rmse = 0.0;
  std::size_t used = 0;
  std::size_t failed = 0;
  std::vector<double> estimates;  ///< successful replicates, in replicate order
};

struct SimulationReport {
  std::vector<SimulationRow> rows;
  std::vector<std::pair<std::string, double>> oracle;  ///< per scenario
  int replicates = 0;

  const SimulationRow& row(const std::string& scenario, int n, SimEstimator e) const;
};

/// Runs every estimator variant on `options.replicates` simulated trials
/// for each size. Deterministic in (scenario, options) regardless of
/// `options.workers`.
SimulationReport run_simulation(const Scenario& s, const SimulationOptions& options);

/// Long format: one row per (scenario, n, estimator).
std::string simulation_report_csv(const SimulationReport& report);
/// Wide format with the six estimators side by side per (scenario, n).
std::string simulation_report_wide_csv(const SimulationReport& report);
std::string simulation_report_json(const SimulationReport& report);

}  // namespace cbindex
