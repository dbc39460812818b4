#include "cbindex/simulation.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cbindex/errors.hpp"
#include "cbindex/format.hpp"
#include "cbindex/parallel.hpp"

namespace cbindex {

namespace {

constexpr std::uint64_t kPopulationStream = 0x909ull;
constexpr double kPoissonTheta = 1e7;

Eigen::VectorXd coefficients_from(double intercept, double treatment, std::initializer_list<double> mains,
                                  std::initializer_list<double> interactions) {
  Eigen::VectorXd b(2 + mains.size() + interactions.size());
  b(0) = intercept;
  b(1) = treatment;
  Eigen::Index k = 2;
  for (double v : mains) b(k++) = v;
  for (double v : interactions) b(k++) = v;
  return b;
}

Eigen::VectorXd main_predictor(const Eigen::VectorXd& b, const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.cols();
  return (x * b.segment(2, m)).array() + b(0);
}

Eigen::VectorXd treatment_predictor(const Eigen::VectorXd& b, const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.cols();
  return (x * b.tail(m)).array() + b(1);
}

void aggregate(SimulationRow& row) {
  row.used = row.estimates.size();
  if (row.estimates.empty()) {
    row.mean = row.bias = row.sd = row.rmse = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const auto count = static_cast<double>(row.used);
  double sum = 0.0;
  for (double v : row.estimates) sum += v;
  row.mean = sum / count;
  double ss = 0.0;
  double se = 0.0;
  for (double v : row.estimates) {
    ss += (v - row.mean) * (v - row.mean);
    se += (v - row.oracle) * (v - row.oracle);
  }
  row.bias = row.mean - row.oracle;
  row.sd = std::sqrt(ss / count);
  row.rmse = std::sqrt(se / count);
}

}  // namespace

std::vector<CovariateLaw> default_covariate_laws() {
  using K = CovariateLaw::Kind;
  return {{"sex", K::bernoulli, 0.5},
          {"age", K::standard_normal, 0.0},
          {"prior_hospitalization", K::bernoulli, 0.3},
          {"prior_corticosteroids", K::bernoulli, 0.5},
          {"fev1", K::standard_normal, 0.0},
          {"sgrq", K::standard_normal, 0.0}};
}

Eigen::VectorXd strong_interaction_coefficients() {
  return coefficients_from(-1.959, 0.693, {-0.241, -0.004, 0.976, 0.479, -0.176, 1.792},
                           {0.109, -0.014, 0.045, 0.121, 0.006, -0.555});
}

Eigen::VectorXd weak_interaction_coefficients() {
  return coefficients_from(-1.367, -0.116, {-0.155, -0.008, 0.744, 0.420, -0.108, 1.395},
                           {0.017, -0.003, 0.172, 0.005, -0.063, -0.118});
}

Scenario strong_scenario() {
  Scenario s;
  s.name = "strong";
  s.coefficients = strong_interaction_coefficients();
  return s;
}

Scenario weak_scenario() {
  Scenario s;
  s.name = "weak";
  s.coefficients = weak_interaction_coefficients();
  return s;
}

Scenario null_scenario() {
  Scenario s;
  s.name = "null";
  s.coefficients = Eigen::VectorXd::Zero(weak_interaction_coefficients().size());
  s.constant_benefit_reference = weak_interaction_coefficients();
  return s;
}

Scenario scenario_by_name(const std::string& name) {
  if (name == "strong") return strong_scenario();
  if (name == "weak") return weak_scenario();
  if (name == "null") return null_scenario();
  throw ConfigError("unknown scenario '" + name + "' (expected strong, weak or null)");
}

Population generate_population(const Scenario& s, Eigen::Index size, std::uint64_t seed) {
  if (size < 1000) throw ConfigError("population size must be at least 1000");
  const auto m = static_cast<Eigen::Index>(s.covariates.size());
  if (s.coefficients.size() != 2 * m + 2) throw DimensionError("scenario coefficients do not match covariates");

  Rng rng = stream_rng(seed, {kPopulationStream});
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(size, m);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& law = s.covariates[static_cast<std::size_t>(j)];
      if (law.kind == CovariateLaw::Kind::bernoulli) {
        x(i, j) = uniform01(rng) < law.probability ? 1.0 : 0.0;
      } else {
        x(i, j) = normal(rng);
      }
    }
  }
  Population pop;
  for (const auto& law : s.covariates) pop.covariate_names.push_back(law.name);
  std::vector<std::string> ids(static_cast<std::size_t>(size));
  auto [z, scaling] = standardize(TrialDataset(std::move(ids), Eigen::VectorXi::Zero(size), Eigen::VectorXd::Zero(size),
                                               Eigen::VectorXd::Ones(size), std::move(x), pop.covariate_names));
  pop.covariates = z.covariates();

  if (s.constant_benefit_reference) {
    const Eigen::VectorXd& ref = *s.constant_benefit_reference;
    const Eigen::ArrayXd ref_base = main_predictor(ref, pop.covariates).array().exp();
    const Eigen::ArrayXd ref_ratio = treatment_predictor(ref, pop.covariates).array().exp();
    const double untreated = ref_base.mean();
    const double c = (ref_base * (1.0 - ref_ratio)).mean();
    pop.untreated_rate = Eigen::VectorXd::Constant(size, untreated);
    pop.treated_rate = Eigen::VectorXd::Constant(size, untreated - c);
    pop.benefit = Eigen::VectorXd::Constant(size, c);
  } else {
    const Eigen::ArrayXd base = main_predictor(s.coefficients, pop.covariates).array().exp();
    const Eigen::ArrayXd ratio = treatment_predictor(s.coefficients, pop.covariates).array().exp();
    pop.untreated_rate = base.matrix();
    pop.treated_rate = (base * ratio).matrix();
    pop.benefit = (base * (1.0 - ratio)).matrix();
  }
  return pop;
}

CbEstimate population_cb(const Population& pop) { return cb_parametric(make_benefit_vector(pop.benefit)); }

TrialDataset simulate_trial(const Scenario& s, const Population& pop, Eigen::Index n, Rng& rng) {
  const auto size = static_cast<std::uint64_t>(pop.covariates.rows());
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = static_cast<Eigen::Index>(uniform_index(rng, size));

  Eigen::VectorXi a(n);
  Eigen::VectorXd t(n), y(n);
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  std::gamma_distribution<double> frailty(s.theta, 1.0 / s.theta);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = rows[static_cast<std::size_t>(i)];
    a(i) = uniform01(rng) < 0.5 ? 1 : 0;
    t(i) = s.followup == FollowUp::fixed_one_year ? 1.0 : 0.5 + 0.5 * uniform01(rng);
    double mu = (a(i) == 1 ? pop.treated_rate(src) : pop.untreated_rate(src)) * t(i);
    if (s.theta < kPoissonTheta) mu *= frailty(rng);
    std::poisson_distribution<long long> counts(mu);
    y(i) = mu > 0.0 ? static_cast<double>(counts(rng)) : 0.0;
    ids.push_back("s" + std::to_string(i + 1));
  }
  return TrialDataset(std::move(ids), std::move(a), std::move(y), std::move(t),
                      pop.covariates(rows, Eigen::all), pop.covariate_names);
}

const char* to_string(SimEstimator e) {
  switch (e) {
    case SimEstimator::parametric_ridge: return "parametric-ridge";
    case SimEstimator::parametric_ml: return "parametric-ML";
    case SimEstimator::semi_ridge: return "semi-ridge";
    case SimEstimator::semi_ml: return "semi-ML";
    case SimEstimator::semi_ridge_adjusted: return "semi-ridge-adjusted";
    case SimEstimator::semi_ml_adjusted: return "semi-ML-adjusted";
  }
  return "unknown";
}

const SimulationRow& SimulationReport::row(const std::string& scenario, int n, SimEstimator e) const {
  for (const auto& r : rows) {
    if (r.scenario == scenario && r.n == n && r.estimator == e) return r;
  }
  throw ConfigError("no simulation row for " + scenario + ", n=" + std::to_string(n) + ", " + to_string(e));
}

SimulationReport run_simulation(const Scenario& s, const SimulationOptions& options) {
  if (options.replicates < 1) throw ConfigError("replicates must be positive");
  for (int n : options.sizes) {
    if (n < 20) throw ConfigError("simulated trial size must be at least 20");
  }
  const std::uint64_t tag = fnv1a(s.name);
  const Population pop = generate_population(s, options.population_size, stream_seed(options.seed, {tag}));
  const double oracle = population_cb(pop).cb;

  NbPipelineOptions ridge_opts = options.ridge;
  ridge_opts.model = ModelKind::ridge;
  NbPipelineOptions ml_opts = options.ridge;
  ml_opts.model = ModelKind::ml;
  const Pipeline ridge = make_nb_pipeline(ridge_opts);
  const Pipeline ml = make_nb_pipeline(ml_opts);

  SimulationReport report;
  report.replicates = options.replicates;
  report.oracle.emplace_back(s.name, oracle);

  const auto reps = static_cast<std::size_t>(options.replicates);
  for (int n : options.sizes) {
    std::vector<std::array<std::optional<double>, 6>> results(reps);
    parallel_for(reps, options.workers, [&](std::size_t r) {
      Rng rng = stream_rng(options.seed, {tag, static_cast<std::uint64_t>(n), r});
      const TrialDataset trial = simulate_trial(s, pop, n, rng);
      auto& out = results[r];

      auto evaluate = [&](const Pipeline& pipeline, std::size_t param_slot, std::size_t semi_slot,
                          std::size_t adjusted_slot) {
        const std::uint64_t train_seed = rng();
        const std::uint64_t optimism_seed = rng();
        TrainedModel trained;
        try {
          trained = pipeline.train(trial, train_seed, std::nullopt);
        } catch (const Error&) {
          return;
        }
        const BenefitVector bv = trained.predict(trial);
        try {
          out[param_slot] = cb_parametric(bv).cb;
        } catch (const Error&) {
        }
        try {
          const CbEstimate semi = cb_semiparametric(trial, bv);
          if (!semi.degenerate) out[semi_slot] = semi.cb;
        } catch (const Error&) {
        }
        if (options.optimism_replicates < 2) return;
        BootstrapConfig cfg;
        cfg.replicates = options.optimism_replicates;
        cfg.seed = optimism_seed;
        cfg.workers = 1;
        cfg.refit_shrinkage = options.optimism_refit_shrinkage;
        try {
          const OptimismResult adj = optimism_adjust_both(trial, pipeline, cfg, &trained)[1];
          if (!adj.original.degenerate && std::isfinite(adj.adjusted)) out[adjusted_slot] = adj.adjusted;
        } catch (const Error&) {
        }
      };
      evaluate(ridge, 0, 2, 4);
      evaluate(ml, 1, 3, 5);
    });

    for (std::size_t e = 0; e < kSimEstimators.size(); ++e) {
      SimulationRow row;
      row.scenario = s.name;
      row.n = n;
      row.estimator = kSimEstimators[e];
      row.oracle = oracle;
      for (const auto& res : results) {
        if (res[e]) row.estimates.push_back(*res[e]);
        else ++row.failed;
      }
      aggregate(row);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string simulation_report_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "scenario,n,estimator,oracle_cb,mean,bias,sd,rmse,used,failed\n";
  for (const auto& r : report.rows) {
    out << r.scenario << ',' << r.n << ',' << to_string(r.estimator) << ',' << format_number(r.oracle) << ','
        << format_number(r.mean) << ',' << format_number(r.bias) << ',' << format_number(r.sd) << ','
        << format_number(r.rmse) << ',' << r.used << ',' << r.failed << '\n';
  }
  return out.str();
}

std::string simulation_report_wide_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "scenario,oracle_cb,n";
  for (auto e : kSimEstimators) {
    for (const char* stat : {"bias", "sd", "rmse"}) out << ',' << to_string(e) << '_' << stat;
  }
  out << '\n';
  std::vector<std::pair<std::string, int>> keys;
  for (const auto& r : report.rows) {
    std::pair<std::string, int> key{r.scenario, r.n};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [scenario, n] : keys) {
    out << scenario << ',' << format_number(report.row(scenario, n, kSimEstimators[0]).oracle) << ',' << n;
    for (auto e : kSimEstimators) {
      const auto& r = report.row(scenario, n, e);
      out << ',' << format_number(r.bias) << ',' << format_number(r.sd) << ',' << format_number(r.rmse);
    }
    out << '\n';
  }
  return out.str();
}

std::string simulation_report_json(const SimulationReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["replicates"] = report.replicates;
  auto& oracle = j["oracle_cb"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : report.oracle) oracle[name] = value;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); };
  for (const auto& r : report.rows) {
    rows.push_back({{"scenario", r.scenario},
                    {"n", r.n},
                    {"estimator", to_string(r.estimator)},
                    {"mean", num(r.mean)},
                    {"bias", num(r.bias)},
                    {"sd", num(r.sd)},
                    {"rmse", num(r.rmse)},
                    {"used", r.used},
                    {"failed", r.failed}});
  }
  return j.dump(2);
}

}  // namespace cbindex
