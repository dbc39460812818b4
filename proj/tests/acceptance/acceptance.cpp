// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: cbindex_acceptance [criterion numbers...]  (default: all)
// CBINDEX_WORKERS sets the thread count for the simulation-heavy criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cbindex/benefit.hpp"
#include "cbindex/errors.hpp"
#include "cbindex/inference.hpp"
#include "cbindex/nbglm.hpp"
#include "cbindex/parallel.hpp"
#include "cbindex/simulation.hpp"
#include "cli.hpp"
#include "oracles/nb_likelihood.hpp"
#include "oracles/pairwise.hpp"
#include "support.hpp"

using namespace cbindex;

namespace {

// Seeds are fixed up front; they are not tuned to any outcome.
constexpr std::uint64_t kSeed = 20240601;

std::size_t workers() {
  if (const char* w = std::getenv("CBINDEX_WORKERS")) return static_cast<std::size_t>(std::max(1, std::atoi(w)));
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects sub-check results; the first few failures are kept for the report.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (ok) return;
    ++failed_;
    if (failed_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { info_ += (info_.empty() ? "" : "; ") + s; }
  Outcome outcome() const {
    Outcome o;
    o.pass = failed_ == 0;
    o.detail = std::to_string(total_ - failed_) + "/" + std::to_string(total_) + " checks";
    if (!info_.empty()) o.detail += "; " + info_;
    if (!notes_.empty()) o.detail += "; failed: " + notes_;
    return o;
  }

 private:
  int total_ = 0;
  int failed_ = 0;
  std::string notes_;
  std::string info_;
};

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

std::vector<double> mixed_vector(Rng& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.1, 1.0);
  std::vector<double> b(n);
  for (auto& v : b) v = uniform01(rng) < 0.05 ? 0.25 : normal(rng);
  return b;
}

Outcome criterion1() {
  Checks c;
  Rng rng = stream_rng(kSeed, {1});
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < 1000; ++r) {
    const auto b = mixed_vector(rng, 2 + uniform_index(rng, 499));
    const auto bv = make_benefit_vector(testing_support::to_eigen(b));
    const auto o = oracle::pairwise(b);
    c.expect(close(pair_max_parametric(bv), o.pair_max, 1e-12), "pair_max r=" + std::to_string(r));
    c.expect(close(delta_b(bv), o.half_abs_diff, 1e-12), "delta_b r=" + std::to_string(r));
    const double g = gini_b(bv);
    c.expect(std::isinf(o.gini) ? std::isinf(g) : std::abs(g - o.gini) <= 1e-12 * std::max(1.0, std::abs(o.gini)),
             "gini r=" + std::to_string(r));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 10.0, "runtime " + fmt(secs, 1) + " s");
  c.note("1000 vectors in " + fmt(secs, 2) + " s");
  return c.outcome();
}

Outcome criterion2() {
  Checks c;
  Rng rng = stream_rng(kSeed, {2});
  double worst = 0.0;
  for (int r = 0; r < 100; ++r) {
    std::vector<double> b;
    do {
      b = mixed_vector(rng, 100 + uniform_index(rng, 900));
    } while (!(testing_support::to_eigen(b).mean() > 0.0));
    const auto bv = make_benefit_vector(testing_support::to_eigen(b));
    const auto e = cb_parametric(bv);
    const auto o = oracle::pairwise(b);
    c.expect(std::abs(e.cb - e.gini_b / (1.0 + e.gini_b)) < 1e-12, "cb vs gini r=" + std::to_string(r));
    c.expect(close(e.delta_b, o.half_abs_diff, 1e-12), "delta r=" + std::to_string(r));
    std::vector<double> grid(20000);
    for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = static_cast<double>(k + 1) / static_cast<double>(grid.size());
    const double area = integrate_from_origin(grid, benefit_curve(bv, grid));
    const double rel = std::abs(area - 0.5 * e.pair_max) / std::abs(0.5 * e.pair_max);
    worst = std::max(worst, rel);
    c.expect(rel < 1e-3, "integral r=" + std::to_string(r));
  }
  c.note("largest integral relative error " + fmt(worst * 1e6, 3) + "e-6");
  return c.outcome();
}

Outcome criterion3() {
  Checks c;
  Rng rng = stream_rng(kSeed, {3});
  for (int r = 0; r < 1000; ++r) {
    const auto b = testing_support::random_benefits(rng, 2 + uniform_index(rng, 300), true);
    const double cb = cb_parametric(make_benefit_vector(testing_support::to_eigen(b))).cb;
    c.expect(cb >= 0.0 && cb <= 0.5, "non-negative r=" + std::to_string(r) + " cb=" + fmt(cb));
  }
  for (double a : {1e-6, 0.3, 1.0, 7.5, 1e6}) {
    const auto e = cb_parametric(make_benefit_vector((Eigen::VectorXd(2) << a, -a).finished()));
    c.expect(e.cb == 1.0, "[a,-a] a=" + fmt(a));
  }
  for (double a : {1e-6, 0.3, 1.0, 7.5, 1e6}) {
    for (Eigen::Index n : {2, 3, 17, 500}) {
      c.expect(cb_parametric(make_benefit_vector(Eigen::VectorXd::Constant(n, a))).cb == 0.0, "constant");
    }
  }
  return c.outcome();
}

Outcome criterion4() {
  Checks c;
  Rng rng = stream_rng(kSeed, {4});
  std::normal_distribution<double> normal(0.0, 0.3);
  const std::vector<Eigen::Index> sizes{100, 150, 200, 300, 500, 800, 1000, 1500, 2000, 3000,
                                        5000, 120, 250, 400, 600, 1200, 2500, 4000, 5000, 180};
  double worst = 0.0;
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(r % 6);
    Eigen::VectorXd beta(2 * m + 2);
    for (Eigen::Index j = 0; j < beta.size(); ++j) beta(j) = normal(rng);
    beta(0) = 0.2;
    const double theta = 0.5 + 2.5 * uniform01(rng);
    const auto design = prepare_design(
        testing_support::simulate_nb_trial(sizes[r], beta, theta, stream_seed(kSeed, {4, r}), r % 2 == 1));
    const auto ours = fit(design, 0.0, theta);
    const auto ref = oracle::nb_mle_fixed_theta(design.x, design.offset, design.response, theta);
    const double diff = (ours.coefficients - ref).cwiseAbs().maxCoeff();
    worst = std::max(worst, diff);
    c.expect(ours.fit.converged && diff < 1e-4, "instance " + std::to_string(r) + " diff " + fmt(diff, 8));

    for (double lambda : {0.0, 1.0}) {
      const auto m2 = fit_with_dispersion(design, lambda);
      bool mono = true;
      for (std::size_t k = 1; k < m2.fit.deviance_trace.size(); ++k) {
        mono = mono && m2.fit.deviance_trace[k] <= m2.fit.deviance_trace[k - 1] * (1 + 1e-12);
      }
      c.expect(mono, "deviance trace instance " + std::to_string(r));
    }
    if (r < 5) {
      double previous = -1.0;
      bool shrink = true;
      for (double lambda : default_lambda_grid(design, 100)) {
        const auto& b = fit(design, lambda, theta).coefficients;
        const double norm = b.tail(b.size() - 1).squaredNorm();
        shrink = shrink && norm >= previous - 1e-12 * std::max(1.0, previous);
        previous = norm;
      }
      c.expect(shrink, "shrinkage path instance " + std::to_string(r));
    }
  }
  c.note("largest coefficient difference " + fmt(worst * 1e6, 3) + "e-6");
  return c.outcome();
}

Outcome criterion5() {
  Checks c;
  Eigen::MatrixXd x(4, 1);
  x << 4, 3, 2, 1;
  const TrialDataset d({"a", "b", "c", "d"}, (Eigen::VectorXi(4) << 0, 1, 0, 1).finished(),
                       (Eigen::VectorXd(4) << 2, 0, 1, 1).finished(), Eigen::VectorXd::Ones(4), x, {"score"});
  const auto bv = make_benefit_vector(x.col(0).eval());
  const auto s = semiparametric_partial_sums(d, bv).sums;
  c.expect(s.size() == 4 && s(0) == 2.0 && s(1) == 4.0 && s(2) == 4.5 && s(3) == 4.0, "partial sums");
  const auto e = cb_semiparametric(d, bv);
  c.expect(e.mean_benefit == 1.0, "mean benefit");
  c.expect(e.cb == 0.36, "cb " + fmt(e.cb, 17));
  return c.outcome();
}

Outcome criterion6() {
  Checks c;
  const auto start = std::chrono::steady_clock::now();
  const Scenario s = strong_scenario();
  const Population pop = generate_population(s, 1000000, stream_seed(kSeed, {6, 0}));
  const double oracle = population_cb(pop).cb;
  Rng rng = stream_rng(kSeed, {6, 1});
  const TrialDataset trial = simulate_trial(s, pop, 50000, rng);
  const auto trained = make_nb_pipeline({ModelKind::ml}).train(trial, stream_seed(kSeed, {6, 2}), std::nullopt);
  const auto bv = trained.predict(trial);
  std::string estimate = "none";
  try {
    const double cb = cb_parametric(bv).cb;
    estimate = fmt(cb);
    c.expect(std::abs(cb - oracle) <= 0.02, "outside +-0.02");
  } catch (const OrientationError&) {
    c.expect(false, "fitted mean benefit negative");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 300.0, "runtime");
  c.note("oracle " + fmt(oracle) + ", estimate " + estimate + ", fitted mean benefit " + fmt(mean_benefit(bv)) +
         ", population mean benefit " + fmt(pop.benefit.mean()) + ", " + fmt(secs, 1) + " s");
  return c.outcome();
}

Outcome criterion7() {
  Checks c;
  const auto start = std::chrono::steady_clock::now();
  SimulationOptions o;
  o.sizes = {400, 1000, 5000};
  o.replicates = 50;
  o.seed = kSeed;
  o.population_size = 1000000;
  o.optimism_replicates = 25;
  o.optimism_refit_shrinkage = false;
  o.ridge.folds = 10;
  o.ridge.grid_size = 25;
  o.workers = workers();

  std::cout << "criterion 7 simulation table\n";
  for (const auto& scenario : {null_scenario(), weak_scenario(), strong_scenario()}) {
    const auto rep = run_simulation(scenario, o);
    std::cout << simulation_report_csv(rep);
    const std::string& name = scenario.name;
    auto row = [&](int n, SimEstimator e) { return rep.row(name, n, e); };

    if (name == "null") {
      for (auto e : kSimEstimators) {
        for (int n : o.sizes) {
          c.expect(row(n, e).bias > 0.0, "7a null bias " + std::string(to_string(e)) + " n=" + std::to_string(n));
        }
      }
      const auto ml = [&](int n) { return row(n, SimEstimator::parametric_ml).bias; };
      c.expect(ml(400) > ml(1000) && ml(1000) > ml(5000),
               "7a ML bias " + fmt(ml(400)) + "/" + fmt(ml(1000)) + "/" + fmt(ml(5000)));
      for (auto [adj, raw] : {std::pair{SimEstimator::semi_ridge_adjusted, SimEstimator::semi_ridge},
                              std::pair{SimEstimator::semi_ml_adjusted, SimEstimator::semi_ml}}) {
        c.expect(row(400, adj).bias < row(400, raw).bias,
                 "7d " + std::string(to_string(adj)) + " " + fmt(row(400, adj).bias) + " vs " + fmt(row(400, raw).bias));
      }
    }
    for (auto e : kSimEstimators) {
      const double r1 = row(400, e).rmse, r2 = row(1000, e).rmse, r3 = row(5000, e).rmse;
      c.expect(r1 > r2 && r2 > r3, "7b " + name + " " + to_string(e) + " RMSE " + fmt(r1) + "/" + fmt(r2) + "/" + fmt(r3));
    }
    double semi = 0.0, param = 0.0;
    for (int n : o.sizes) {
      semi += row(n, SimEstimator::semi_ridge).sd + row(n, SimEstimator::semi_ml).sd;
      param += row(n, SimEstimator::parametric_ridge).sd + row(n, SimEstimator::parametric_ml).sd;
    }
    c.expect(semi >= param, "7c " + name + " semi SD " + fmt(semi / 6) + " < parametric " + fmt(param / 6));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 1800.0, "runtime");
  c.note(fmt(secs / 60.0, 1) + " min");
  return c.outcome();
}

Outcome criterion8() {
  Checks c;
  testing_support::TempDir dir("acceptance8");
  const auto d = testing_support::simulate_nb_trial(
      300, (Eigen::VectorXd(8) << 0.1, -0.4, 0.3, 0.2, -0.1, -0.3, 0.1, 0.2).finished(), 1.5, kSeed);
  const auto input = dir.write("trial.csv", testing_support::to_csv(d));

  auto run = [&](std::vector<std::string> args, const std::string& out, const std::string& w) {
    args.insert(args.end(), {"--out", out, "--workers", w});
    std::ostringstream so, se;
    const int code = cli::run(args, so, se);
    c.expect(code == 0, "exit code " + std::to_string(code) + " " + se.str());
  };
  auto same_dirs = [&](const std::string& a, const std::string& b, const std::string& what) {
    std::set<std::string> names;
    for (const auto& f : std::filesystem::directory_iterator(a)) names.insert(f.path().filename().string());
    std::size_t count = 0;
    for (const auto& f : std::filesystem::directory_iterator(b)) {
      ++count;
      const std::string n = f.path().filename().string();
      c.expect(names.count(n) == 1 &&
                   testing_support::slurp(a + "/" + n) == testing_support::slurp(b + "/" + n),
               what + " " + n);
    }
    c.expect(count == names.size() && count > 0, what + " file set");
  };

  const std::vector<std::string> estimate{"estimate", "--input", input, "--seed", "8", "--folds", "5",
                                          "--grid-size", "20", "--bootstrap", "20", "--optimism", "10"};
  run(estimate, dir.file("e1"), "1");
  run(estimate, dir.file("e2"), "1");
  run(estimate, dir.file("e8"), "8");
  same_dirs(dir.file("e1"), dir.file("e2"), "estimate rerun");
  same_dirs(dir.file("e1"), dir.file("e8"), "estimate 1 vs 8 workers");

  const std::vector<std::string> simulate{"simulate", "--scenario", "strong", "--n", "200,400", "--replicates", "6",
                                          "--seed", "8", "--population", "20000", "--optimism", "5", "--folds", "5",
                                          "--grid-size", "10"};
  run(simulate, dir.file("s1"), "1");
  run(simulate, dir.file("s2"), "1");
  run(simulate, dir.file("s8"), "8");
  same_dirs(dir.file("s1"), dir.file("s2"), "simulate rerun");
  same_dirs(dir.file("s1"), dir.file("s8"), "simulate 1 vs 8 workers");
  return c.outcome();
}

Outcome criterion9() {
  Checks c;
  const auto start = std::chrono::steady_clock::now();
  const Scenario s = strong_scenario();
  const Population pop = generate_population(s, 1000000, stream_seed(kSeed, {9, 0}));
  const double oracle = population_cb(pop).cb;
  const Pipeline pipeline = make_nb_pipeline({ModelKind::ml});

  const int outer = 100;
  std::vector<int> covered(outer, 0), undefined(outer, 0);
  std::vector<double> width(outer, 0.0);
  // Outer runs are spread over workers; each bootstrap runs sequentially.
  parallel_for(outer, workers(), [&](std::size_t r) {
    Rng rng = stream_rng(kSeed, {9, 1, r});
    const TrialDataset trial = simulate_trial(s, pop, 1000, rng);
    BootstrapConfig cfg;
    cfg.replicates = 200;
    cfg.seed = stream_seed(kSeed, {9, 2, r});
    try {
      const auto ci = bootstrap_ci(trial, pipeline, EstimatorKind::parametric, cfg);
      covered[r] = ci.lower <= oracle && oracle <= ci.upper;
      width[r] = ci.upper - ci.lower;
    } catch (const Error&) {
      undefined[r] = 1;  // no point estimate, so no interval
    }
  });
  int hits = 0, none = 0;
  double mean_width = 0.0;
  for (int r = 0; r < outer; ++r) {
    hits += covered[static_cast<std::size_t>(r)];
    none += undefined[static_cast<std::size_t>(r)];
    mean_width += width[static_cast<std::size_t>(r)];
  }
  mean_width /= std::max(1, outer - none);
  c.expect(hits >= 80, "coverage " + std::to_string(hits) + "/100");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.note("oracle " + fmt(oracle) + ", covered " + std::to_string(hits) + "/100, " + std::to_string(none) +
         " runs without an interval, mean width " + fmt(mean_width) + ", " + fmt(secs / 60.0, 1) + " min");
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", criterion1},       {"identity suite", criterion2},
      {"bound suite", criterion3},              {"GLM correctness", criterion4},
      {"semi-parametric worked example", criterion5}, {"estimator consistency", criterion6},
      {"simulation pattern", criterion7},       {"determinism", criterion8},
      {"bootstrap coverage", criterion9},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!selected.empty() && selected.count(id) == 0) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << id << " [" << criteria[k].first << "]: " << (o.pass ? "PASS" : "FAIL") << " ("
              << o.detail << ")" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
