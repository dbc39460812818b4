#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbindex/benefit.hpp"
#include "cbindex/errors.hpp"
#include "cbindex/format.hpp"
#include "cbindex/inference.hpp"
#include "cbindex/random.hpp"
#include "cbindex/simulation.hpp"

namespace cbindex::cli {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kBootstrapStream = 2;
constexpr std::uint64_t kOptimismStream = 3;

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
  if (content.empty() || content.back() != '\n') out << '\n';
}

ojson number(double x) { return std::isfinite(x) ? ojson(x) : ojson(nullptr); }

void apply_config_file(RunConfig& cfg, const std::string& path) {
  ojson j;
  try {
    j = ojson::parse(read_file(path, "config file"));
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "input") cfg.input = value.get<std::string>();
      else if (key == "model") cfg.model = value.get<std::string>();
      else if (key == "estimator") cfg.estimator = value.get<std::string>();
      else if (key == "bootstrap") cfg.bootstrap = value.get<int>();
      else if (key == "optimism") cfg.optimism = value.get<int>();
      else if (key == "ci_level") cfg.ci_level = value.get<double>();
      else if (key == "refit_shrinkage") cfg.refit_shrinkage = value.get<bool>();
      else if (key == "stratify_bootstrap") cfg.stratify_bootstrap = value.get<bool>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "workers") cfg.workers = value.get<std::size_t>();
      else if (key == "folds") cfg.folds = value.get<int>();
      else if (key == "grid_size") cfg.grid_size = value.get<int>();
      else if (key == "grid_ratio") cfg.grid_ratio = value.get<double>();
      else if (key == "cv_loss") cfg.cv_loss = value.get<std::string>();
      else if (key == "scenario") cfg.scenario = value.get<std::string>();
      else if (key == "n") cfg.sizes = value.get<std::vector<int>>();
      else if (key == "replicates") cfg.replicates = value.get<int>();
      else if (key == "population") cfg.population = value.get<long>();
      else if (key == "model_file") cfg.model_file = value.get<std::string>();
      else if (key == "curve_points") cfg.curve_points = value.get<int>();
      else if (key == "columns") {
        cfg.columns_given = true;
        cfg.columns.id = value.value("id", "");
        cfg.columns.treatment = value.value("treatment", "treatment");
        cfg.columns.events = value.value("events", "events");
        cfg.columns.time = value.value("time", "time");
        cfg.columns.covariates = value.value("covariates", std::vector<std::string>{});
        if (cfg.columns.covariates.empty()) cfg.columns_given = false;
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config file has a value of the wrong type: ") + e.what());
  }
}

void validate(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError("--seed is required");
  if (cfg.model != "ridge" && cfg.model != "ml") throw ConfigError("--model must be ridge or ml");
  if (cfg.estimator != "parametric" && cfg.estimator != "semiparametric" && cfg.estimator != "both") {
    throw ConfigError("--estimator must be parametric, semiparametric or both");
  }
  if (cfg.cv_loss != "squared_error" && cfg.cv_loss != "deviance") {
    throw ConfigError("cv_loss must be squared_error or deviance");
  }
  if (cfg.bootstrap < 0 || cfg.bootstrap == 1) throw ConfigError("--bootstrap must be 0 or at least 2");
  if (cfg.optimism < 0 || cfg.optimism == 1) throw ConfigError("--optimism must be 0 or at least 2");
  if (cfg.workers < 1) throw ConfigError("--workers must be positive");
  if (cfg.folds < 2) throw ConfigError("--folds must be at least 2");
  if (cfg.grid_size < 1) throw ConfigError("--grid-size must be positive");
  if (!(cfg.grid_ratio > 0.0 && cfg.grid_ratio <= 1.0)) throw ConfigError("grid_ratio must lie in (0, 1]");
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
}

NbPipelineOptions pipeline_options(const RunConfig& cfg) {
  NbPipelineOptions o;
  o.model = cfg.model == "ml" ? ModelKind::ml : ModelKind::ridge;
  o.folds = cfg.folds;
  o.grid_size = cfg.grid_size;
  o.grid_ratio = cfg.grid_ratio;
  o.loss = cfg.cv_loss == "deviance" ? CvLoss::deviance : CvLoss::squared_error;
  return o;
}

std::string csv_banner(const std::string& digest, std::uint64_t seed) {
  return "# config_digest=" + digest + " seed=" + std::to_string(seed) + "\n";
}

LoadResult load_input(RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("--input is required");
  if (!cfg.columns_given) {
    const auto header = read_csv_header(cfg.input);
    const bool has_id = std::find(header.begin(), header.end(), "id") != header.end();
    cfg.columns.id = has_id ? "id" : "";
    cfg.columns.covariates.clear();
    for (const auto& h : header) {
      if (h == "id" || h == cfg.columns.treatment || h == cfg.columns.events || h == cfg.columns.time) continue;
      cfg.columns.covariates.push_back(h);
    }
  }
  return load_dataset_file(cfg.input, cfg.columns);
}

ojson estimate_json(const CbEstimate& e) {
  ojson j;
  j["mean_benefit"] = number(e.mean_benefit);
  j["pair_max"] = number(e.pair_max);
  j["delta_b"] = number(e.delta_b);
  j["gini_b"] = number(e.gini_b);
  j["cb"] = number(e.cb);
  j["out_of_range"] = e.out_of_range;
  return j;
}

ojson model_json(const FittedBenefitModel& m, const std::string& kind) {
  ojson j;
  j["kind"] = kind;
  j["lambda"] = m.lambda;
  j["theta"] = m.theta;
  const Eigen::Index cov = m.covariate_count();
  ojson coefs = ojson::object();
  coefs["intercept"] = m.coefficients(0);
  coefs["treatment"] = m.coefficients(1);
  ojson mains = ojson::object();
  ojson inter = ojson::object();
  for (Eigen::Index k = 0; k < cov; ++k) {
    const auto& name = m.covariate_names[static_cast<std::size_t>(k)];
    mains[name] = m.coefficients(2 + k);
    inter[name] = m.coefficients(2 + cov + k);
  }
  coefs["main_effects"] = mains;
  coefs["treatment_interactions"] = inter;
  j["coefficients"] = coefs;
  j["converged"] = m.fit.converged;
  j["iterations"] = m.fit.iterations;
  j["dispersion_rounds"] = m.fit.dispersion_rounds;
  return j;
}

int cmd_estimate(RunConfig cfg, std::ostream& out) {
  validate(cfg);
  const std::uint64_t seed = *cfg.seed;
  const LoadResult loaded = load_input(cfg);
  const TrialDataset& d = loaded.dataset;
  const std::string digest = config_digest(cfg);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);

  ojson report;
  report["schema_version"] = 1;
  report["command"] = "estimate";
  report["config_digest"] = digest;
  report["seed"] = seed;
  report["status"] = "ok";
  report["diagnostics"] = ojson::array();
  auto diagnose = [&](const std::string& msg) {
    report["status"] = "degenerate";
    report["diagnostics"].push_back(msg);
  };
  ojson data;
  data["subjects"] = d.size();
  data["dropped_incomplete"] = loaded.dropped_incomplete;
  data["control"] = d.arm_size(0);
  data["treated"] = d.arm_size(1);
  data["covariates"] = d.covariate_names();
  report["data"] = data;
  auto finish = [&](int code) {
    write_file(dir / "report.json", report.dump(2));
    out << "C_b report written to " << (dir / "report.json").string() << "\n";
    return code;
  };

  try {
    d.require_both_arms();
  } catch (const EstimatorUndefinedError& e) {
    diagnose(e.what());
    return finish(kDegenerate);
  }
  ojson balance = ojson::array();
  for (const auto& b : balance_check(d)) {
    balance.push_back({{"covariate", b.name}, {"smd", b.smd ? ojson(*b.smd) : ojson(nullptr)}, {"flagged", b.flagged}});
  }
  report["balance"] = balance;

  const Pipeline pipeline = make_nb_pipeline(pipeline_options(cfg));
  TrainedModel trained;
  try {
    trained = pipeline.train(d, stream_seed(seed, {kTrainStream}), std::nullopt);
  } catch (const NumericalError& e) {
    diagnose(e.what());
    return finish(kDegenerate);
  } catch (const DispersionUndefinedError& e) {
    diagnose(e.what());
    return finish(kDegenerate);
  } catch (const InsufficientDataError& e) {
    diagnose(e.what());
    return finish(kDegenerate);
  }
  report["model"] = model_json(*trained.model, cfg.model);
  std::string model_text = model_to_json(*trained.model);
  {
    ojson m = ojson::parse(model_text);
    m["config_digest"] = digest;
    m["seed"] = seed;
    write_file(dir / "model.json", m.dump(2));
  }

  const BenefitVector bv = trained.predict(d);
  {
    std::ostringstream csv;
    csv << csv_banner(digest, seed) << "id,treatment,benefit\n";
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      csv << d.ids()[static_cast<std::size_t>(i)] << ',' << d.treatment()(i) << ',' << format_number(bv.values(i))
          << '\n';
    }
    write_file(dir / "benefit_histogram.csv", csv.str());
  }

  const bool want_param = cfg.estimator != "semiparametric";
  const bool want_semi = cfg.estimator != "parametric";
  ojson estimates = ojson::object();
  std::optional<PartialSumCurve> semi_curve;
  bool failed = false;
  auto run_kind = [&](EstimatorKind kind) {
    try {
      const CbEstimate e = estimate_cb(kind, d, bv);
      if (e.degenerate) {
        estimates[to_string(kind)] = nullptr;
        diagnose(std::string(to_string(kind)) + " estimator undefined: non-positive pair maximum");
        failed = true;
        return;
      }
      estimates[to_string(kind)] = estimate_json(e);
    } catch (const Error& e) {
      estimates[to_string(kind)] = nullptr;
      diagnose(std::string(to_string(kind)) + ": " + e.what());
      failed = true;
    }
  };
  if (want_param) run_kind(EstimatorKind::parametric);
  if (want_semi) run_kind(EstimatorKind::semiparametric);
  report["estimates"] = estimates;
  try {
    semi_curve = semiparametric_partial_sums(d, bv);
  } catch (const Error&) {
  }

  {
    const PartialSumCurve param = parametric_partial_sums(bv);
    std::ostringstream csv;
    csv << csv_banner(digest, seed) << "k,parametric,semiparametric\n";
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      csv << (k + 1) << ',' << format_number(param.sums(k)) << ','
          << (semi_curve ? format_number(semi_curve->sums(k)) : std::string("NA")) << '\n';
    }
    write_file(dir / "partial_sums.csv", csv.str());
  }

  auto kinds_json = [&](auto&& per_kind) {
    ojson j = ojson::object();
    if (want_param) j["parametric"] = per_kind(0);
    if (want_semi) j["semiparametric"] = per_kind(1);
    return j;
  };
  BootstrapConfig bc;
  bc.ci_level = cfg.ci_level;
  bc.refit_shrinkage = cfg.refit_shrinkage;
  bc.stratify_by_arm = cfg.stratify_bootstrap;
  bc.workers = cfg.workers;
  if (cfg.bootstrap > 0) {
    bc.replicates = cfg.bootstrap;
    bc.seed = stream_seed(seed, {kBootstrapStream});
    const auto ci = bootstrap_ci_both(d, pipeline, bc, &trained);
    ojson j = kinds_json([&](std::size_t k) {
      const auto& iv = ci[k];
      return ojson{{"lower", number(iv.lower)},
                   {"upper", number(iv.upper)},
                   {"used", iv.replicate_values.size()},
                   {"failed", iv.n_failed},
                   {"reliability_warning", iv.reliability_warning}};
    });
    for (std::size_t k = 0; k < 2; ++k) {
      if ((k == 0 && !want_param) || (k == 1 && !want_semi)) continue;
      std::ostringstream csv;
      csv << csv_banner(digest, seed) << "cb\n";
      for (double v : ci[k].replicate_values) csv << format_number(v) << '\n';
      write_file(dir / (std::string("bootstrap_") + (k == 0 ? "parametric" : "semiparametric") + ".csv"), csv.str());
    }
    j["replicates"] = cfg.bootstrap;
    j["ci_level"] = cfg.ci_level;
    j["method"] = "percentile";
    report["bootstrap"] = j;
  }
  if (cfg.optimism > 0) {
    bc.replicates = cfg.optimism;
    bc.seed = stream_seed(seed, {kOptimismStream});
    const auto opt = optimism_adjust_both(d, pipeline, bc, &trained);
    ojson j = kinds_json([&](std::size_t k) {
      const auto& r = opt[k];
      return ojson{{"optimism", number(r.optimism)},
                   {"adjusted", number(r.adjusted)},
                   {"used", r.differences.size()},
                   {"failed", r.n_failed},
                   {"experimental", r.experimental}};
    });
    j["replicates"] = cfg.optimism;
    report["optimism"] = j;
  }
  return finish(failed ? kDegenerate : kOk);
}

int cmd_curve(RunConfig cfg, std::ostream& out) {
  validate(cfg);
  if (cfg.curve_points < 1) throw ConfigError("--points must be positive");
  const std::uint64_t seed = *cfg.seed;
  const LoadResult loaded = load_input(cfg);
  const TrialDataset& d = loaded.dataset;
  const std::string digest = config_digest(cfg);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);

  FittedBenefitModel model;
  if (!cfg.model_file.empty()) {
    model = model_from_json(read_file(cfg.model_file, "model file"));
  } else {
    d.require_both_arms();
    model = *make_nb_pipeline(pipeline_options(cfg)).train(d, stream_seed(seed, {kTrainStream}), std::nullopt).model;
  }
  const BenefitVector bv = predicted_benefit(model, d);

  std::vector<double> grid(static_cast<std::size_t>(cfg.curve_points));
  for (int k = 1; k <= cfg.curve_points; ++k) {
    grid[static_cast<std::size_t>(k - 1)] = static_cast<double>(k) / cfg.curve_points;
  }
  const std::vector<double> values = benefit_curve(bv, grid);
  const double integrated = integrate_from_origin(grid, values);
  const double half_pair_max = d.size() >= 2 ? 0.5 * pair_max_parametric(bv) : 0.5 * mean_benefit(bv);

  std::ostringstream csv;
  csv << csv_banner(digest, seed) << "p,benefit\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    csv << format_number(grid[k]) << ',' << format_number(values[k]) << '\n';
  }
  write_file(dir / "benefit_curve.csv", csv.str());

  const double rel = half_pair_max != 0.0 ? std::abs(integrated - half_pair_max) / std::abs(half_pair_max)
                                          : std::abs(integrated);
  ojson summary;
  summary["schema_version"] = 1;
  summary["command"] = "curve";
  summary["config_digest"] = digest;
  summary["seed"] = seed;
  summary["grid_points"] = cfg.curve_points;
  summary["mean_benefit"] = number(mean_benefit(bv));
  summary["integrated_benefit"] = number(integrated);
  summary["half_pair_max"] = number(half_pair_max);
  summary["relative_difference"] = number(rel);
  write_file(dir / "curve_summary.json", summary.dump(2));
  out << "integral of benefit(p) = " << format_number(integrated) << ", E{max}/2 = " << format_number(half_pair_max)
      << " (relative difference " << format_number(rel) << ")\n";
  return kOk;
}

int cmd_simulate(RunConfig cfg, std::ostream& out) {
  if (!cfg.seed) throw ConfigError("--seed is required");
  if (cfg.scenario.empty()) throw ConfigError("--scenario is required");
  validate(cfg);
  const Scenario scenario = scenario_by_name(cfg.scenario);
  if (cfg.sizes.empty()) cfg.sizes = {400, 1000, 5000};
  if (cfg.replicates < 1) throw ConfigError("--replicates must be positive");
  if (cfg.population < 1000) throw ConfigError("--population must be at least 1000");

  SimulationOptions o;
  o.sizes = cfg.sizes;
  o.replicates = cfg.replicates;
  o.seed = *cfg.seed;
  o.population_size = cfg.population;
  o.optimism_replicates = cfg.optimism;
  o.optimism_refit_shrinkage = cfg.refit_shrinkage;
  o.ridge = pipeline_options(cfg);
  o.workers = cfg.workers;
  const SimulationReport report = run_simulation(scenario, o);

  const std::string digest = config_digest(cfg);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  const std::string banner = csv_banner(digest, *cfg.seed);
  write_file(dir / "table3.csv", banner + simulation_report_csv(report));
  write_file(dir / "table3_wide.csv", banner + simulation_report_wide_csv(report));
  ojson j = ojson::parse(simulation_report_json(report));
  j["config_digest"] = digest;
  j["seed"] = *cfg.seed;
  write_file(dir / "table3.json", j.dump(2));
  out << "simulation table written to " << (dir / "table3.csv").string() << "\n";
  return kOk;
}

}  // namespace

std::string config_digest(const RunConfig& cfg) {
  ojson j;
  j["command"] = cfg.command;
  j["input_digest"] = cfg.input.empty() ? "" : hex_digest(read_file(cfg.input, "input file"));
  j["columns"] = {{"id", cfg.columns.id},
                  {"treatment", cfg.columns.treatment},
                  {"events", cfg.columns.events},
                  {"time", cfg.columns.time},
                  {"covariates", cfg.columns.covariates}};
  j["model"] = cfg.model;
  j["estimator"] = cfg.estimator;
  j["bootstrap"] = cfg.bootstrap;
  j["optimism"] = cfg.optimism;
  j["ci_level"] = cfg.ci_level;
  j["refit_shrinkage"] = cfg.refit_shrinkage;
  j["stratify_bootstrap"] = cfg.stratify_bootstrap;
  j["seed"] = cfg.seed.value_or(0);
  j["folds"] = cfg.folds;
  j["grid_size"] = cfg.grid_size;
  j["grid_ratio"] = cfg.grid_ratio;
  j["cv_loss"] = cfg.cv_loss;
  j["scenario"] = cfg.scenario;
  j["n"] = cfg.sizes;
  j["replicates"] = cfg.replicates;
  j["population"] = cfg.population;
  j["model_file_digest"] = cfg.model_file.empty() ? "" : hex_digest(read_file(cfg.model_file, "model file"));
  j["curve_points"] = cfg.curve_points;
  return hex_digest(j.dump());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concentration of benefit index for two-arm trials with count outcomes", "cbindex"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, input, model, estimator, out, scenario, model_file, cv_loss;
    int bootstrap = 0, optimism = 0, folds = 0, grid_size = 0, replicates = 0, points = 0;
    long population = 0;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::vector<int> sizes;
  } f;
  std::vector<std::function<void(RunConfig&)>> overrides;

  auto* estimate = app.add_subcommand("estimate", "fit the benefit model and estimate C_b");
  auto* simulate = app.add_subcommand("simulate", "run the simulation study for one scenario");
  auto* curve = app.add_subcommand("curve", "export benefit(p) over a grid of treated fractions");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file; flags override its values");
    sub->add_option("--seed", f.seed, "random seed (required)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--workers", f.workers, "parallel workers for resampling");
    sub->add_option("--model", f.model, "ridge or ml");
    sub->add_option("--folds", f.folds, "cross-validation folds");
    sub->add_option("--grid-size", f.grid_size, "number of penalty values");
    sub->add_option("--cv-loss", f.cv_loss, "squared_error or deviance");
    sub->add_option("--optimism", f.optimism, "optimism bootstrap replicates");
  };
  for (auto* sub : {estimate, simulate, curve}) common(sub);
  for (auto* sub : {estimate, curve}) sub->add_option("--input", f.input, "trial CSV file");
  estimate->add_option("--estimator", f.estimator, "parametric, semiparametric or both");
  estimate->add_option("--bootstrap", f.bootstrap, "percentile bootstrap replicates");
  simulate->add_option("--scenario", f.scenario, "strong, weak or null");
  simulate->add_option("--n", f.sizes, "trial sizes")->delimiter(',');
  simulate->add_option("--replicates", f.replicates, "simulated trials per size");
  simulate->add_option("--population", f.population, "super-population size");
  curve->add_option("--model-file", f.model_file, "model.json from a previous estimate run");
  curve->add_option("--points", f.points, "grid points on (0, 1]");

  std::vector<const char*> argv{"cbindex"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  RunConfig cfg;
  cfg.command = sub->get_name();
  if (cfg.command == "simulate") cfg.optimism = 200;
  auto given = [&](const char* name) { return sub->get_option_no_throw(name) && sub->count(name) > 0; };
  try {
    if (given("--config")) apply_config_file(cfg, f.config);
    if (given("--seed")) cfg.seed = f.seed;
    if (given("--out")) cfg.out = f.out;
    if (given("--workers")) cfg.workers = f.workers;
    if (given("--model")) cfg.model = f.model;
    if (given("--folds")) cfg.folds = f.folds;
    if (given("--grid-size")) cfg.grid_size = f.grid_size;
    if (given("--cv-loss")) cfg.cv_loss = f.cv_loss;
    if (given("--optimism")) cfg.optimism = f.optimism;
    if (given("--input")) cfg.input = f.input;
    if (given("--estimator")) cfg.estimator = f.estimator;
    if (given("--bootstrap")) cfg.bootstrap = f.bootstrap;
    if (given("--scenario")) cfg.scenario = f.scenario;
    if (given("--n")) cfg.sizes = f.sizes;
    if (given("--replicates")) cfg.replicates = f.replicates;
    if (given("--population")) cfg.population = f.population;
    if (given("--model-file")) cfg.model_file = f.model_file;
    if (given("--points")) cfg.curve_points = f.points;

    if (cfg.command == "estimate") return cmd_estimate(cfg, out);
    if (cfg.command == "simulate") return cmd_simulate(cfg, out);
    return cmd_curve(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const SchemaError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const RowParseError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const DegenerateCovariateError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const Error& e) {
    err << "estimation failed: " << e.what() << "\n";
    return kDegenerate;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace cbindex::cli
