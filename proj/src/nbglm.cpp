#include "cbindex/nbglm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "cbindex/errors.hpp"
#include "cbindex/random.hpp"

namespace cbindex {

namespace {

constexpr double kLambdaMaxStep = 1e-3;
constexpr double kMinRcond = 1e-13;
constexpr int kMaxHalvings = 40;

double penalty_sum(const Eigen::VectorXd& beta) {
  return beta.size() > 1 ? beta.tail(beta.size() - 1).squaredNorm() : 0.0;
}

Eigen::VectorXd means_from(const Eigen::MatrixXd& x, const Eigen::VectorXd& offset, const Eigen::VectorXd& beta) {
  return ((x * beta + offset).array().min(700.0)).exp().matrix();
}

double penalized_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta, double lambda,
                          const Eigen::VectorXd& beta) {
  return nb_deviance(y, mu, theta) + 2.0 * lambda * penalty_sum(beta);
}

struct IrlsOutcome {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
  double penalized_deviance = 0.0;
  std::vector<double> trace;
};

Eigen::VectorXd default_start(const Eigen::MatrixXd& x, const Eigen::VectorXd& offset, const Eigen::VectorXd& y) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  const double exposure = offset.array().exp().sum();
  beta(0) = std::log(std::max(y.sum(), 0.5) / exposure);
  return beta;
}

// Penalized Newton-Raphson for the NB log-link model; column 0 is never penalized.
// The observed information of NB2 under the log link has weights
// mu*theta*(y+theta)/(theta+mu)^2 > 0, so it is always usable as the IRLS matrix.
IrlsOutcome irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& offset, const Eigen::VectorXd& y, double lambda,
                 double theta, Eigen::VectorXd beta, const IrlsOptions& options) {
  const Eigen::Index p = x.cols();
  IrlsOutcome out;
  Eigen::VectorXd mu = means_from(x, offset, beta);
  double dev = penalized_deviance(y, mu, theta, lambda, beta);
  if (!std::isfinite(dev)) {
    beta = default_start(x, offset, y);
    mu = means_from(x, offset, beta);
    dev = penalized_deviance(y, mu, theta, lambda, beta);
  }
  out.trace.push_back(dev);

  Eigen::MatrixXd info(p, p);
  Eigen::MatrixXd scaled(p, x.rows());
  for (int it = 1; it <= options.max_iterations; ++it) {
    out.iterations = it;
    const Eigen::ArrayXd denom = theta + mu.array();
    const Eigen::ArrayXd w = mu.array() * theta * (y.array() + theta) / denom.square();
    const Eigen::ArrayXd u = theta * (y.array() - mu.array()) / denom;

    scaled = (x.array().colwise() * w.sqrt()).matrix().transpose();
    info.setZero();
    info.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
    info.diagonal().tail(p - 1).array() += 2.0 * lambda;
    Eigen::VectorXd gradient = x.transpose() * u.matrix();
    gradient.tail(p - 1) -= 2.0 * lambda * beta.tail(p - 1);

    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(info);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (llt.info() != Eigen::Success || !(rcond > kMinRcond)) {
      throw NumericalError("ill-conditioned IRLS system (reciprocal condition number " + std::to_string(rcond) +
                           "); check for separation or collinear covariates");
    }
    Eigen::VectorXd step = llt.solve(gradient);
    if (!step.allFinite()) throw NumericalError("non-finite IRLS step");

    bool accepted = false;
    Eigen::VectorXd candidate;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      candidate = beta + step;
      Eigen::VectorXd mu_c = means_from(x, offset, candidate);
      const double dev_c = penalized_deviance(y, mu_c, theta, lambda, candidate);
      if (std::isfinite(dev_c) && dev_c <= dev) {
        accepted = true;
        mu = std::move(mu_c);
        dev = dev_c;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent left at machine precision: the current iterate is the optimum.
      out.converged = true;
      break;
    }
    const double change = (candidate - beta).cwiseAbs().maxCoeff();
    beta = std::move(candidate);
    out.trace.push_back(dev);
    if (change < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.beta = std::move(beta);
  out.penalized_deviance = dev;
  return out;
}

// Tail counts n(y > k) for k = 0..max(y)-1 make the digamma-difference sum O(max y).
std::vector<double> exceedance_counts(const Eigen::VectorXd& y) {
  const auto top = static_cast<std::size_t>(y.maxCoeff());
  std::vector<double> hist(top + 1, 0.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) hist[static_cast<std::size_t>(y(i))] += 1.0;
  std::vector<double> tail(top, 0.0);
  double above = 0.0;
  for (std::size_t k = top; k-- > 0;) {
    above += hist[k + 1];
    tail[k] = above;
  }
  return tail;
}

struct DispersionScore {
  double value;
  double derivative;
};

DispersionScore dispersion_score(const std::vector<double>& tail, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& mu, double theta) {
  double s = 0.0;
  double ds = 0.0;
  for (std::size_t k = 0; k < tail.size(); ++k) {
    const double inv = 1.0 / (theta + static_cast<double>(k));
    s += tail[k] * inv;
    ds -= tail[k] * inv * inv;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = mu(i);
    const double tm = theta + m;
    s += -std::log1p(m / theta) + (m - y(i)) / tm;
    ds += m / (theta * tm) - (m - y(i)) / (tm * tm);
  }
  return {s, ds};
}

}  // namespace

DesignMatrix DesignMatrix::subset(const std::vector<Eigen::Index>& rows) const {
  DesignMatrix out;
  out.x = x(rows, Eigen::all);
  out.offset = offset(rows);
  out.response = response(rows);
  out.names = names;
  out.covariate_names = covariate_names;
  out.scaling = scaling;
  return out;
}

DesignMatrix build_design_matrix(const TrialDataset& standardized, ScalingParams scaling) {
  const Eigen::Index n = standardized.size();
  const Eigen::Index m = standardized.covariate_count();
  DesignMatrix d;
  d.x.resize(n, 2 * m + 2);
  const Eigen::VectorXd a = standardized.treatment().cast<double>();
  d.x.col(0).setOnes();
  d.x.col(1) = a;
  d.x.middleCols(2, m) = standardized.covariates();
  d.x.rightCols(m) = standardized.covariates().array().colwise() * a.array();
  d.offset = standardized.time().array().log().matrix();
  d.response = standardized.events();
  d.covariate_names = standardized.covariate_names();
  d.names = {"intercept", "treatment"};
  for (const auto& c : d.covariate_names) d.names.push_back(c);
  for (const auto& c : d.covariate_names) d.names.push_back("treatment:" + c);
  d.scaling = std::move(scaling);
  return d;
}

DesignMatrix prepare_design(const TrialDataset& raw) {
  auto [z, scaling] = standardize(raw);
  return build_design_matrix(z, std::move(scaling));
}

double nb_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double yi = y(i);
    const double m = mu(i);
    for (int k = 0; k < static_cast<int>(yi); ++k) ll += std::log(theta + k);
    ll -= std::lgamma(yi + 1.0);
    ll += -theta * std::log1p(m / theta);
    if (yi > 0.0) ll += yi * (std::log(m) - std::log(theta + m));
  }
  return ll;
}

double nb_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double yi = y(i);
    const double m = mu(i);
    if (yi > 0.0) dev += yi * std::log(yi / m);
    dev -= (yi + theta) * std::log1p((yi - m) / (m + theta));
  }
  return 2.0 * dev;
}

Eigen::VectorXd fitted_means(const DesignMatrix& design, const Eigen::VectorXd& coefficients) {
  if (coefficients.size() != design.cols()) throw DimensionError("coefficient count does not match design");
  return means_from(design.x, design.offset, coefficients);
}

FittedBenefitModel fit(const DesignMatrix& design, double lambda, double theta, const IrlsOptions& options,
                       const Eigen::VectorXd* start) {
  if (!(lambda >= 0.0)) throw ConfigError("penalty must be non-negative");
  if (!(theta > 0.0)) throw ConfigError("dispersion must be positive");
  Eigen::VectorXd beta = start ? *start : default_start(design.x, design.offset, design.response);
  if (beta.size() != design.cols()) throw DimensionError("start vector does not match design");

  IrlsOutcome r = irls(design.x, design.offset, design.response, lambda, theta, std::move(beta), options);
  FittedBenefitModel model;
  model.coefficients = std::move(r.beta);
  model.theta = theta;
  model.lambda = lambda;
  model.scaling = design.scaling;
  model.names = design.names;
  model.covariate_names = design.covariate_names;
  model.fit.iterations = r.iterations;
  model.fit.converged = r.converged;
  model.fit.penalized_deviance = r.penalized_deviance;
  model.fit.deviance_trace = std::move(r.trace);
  return model;
}

double estimate_dispersion(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  if (y.size() != mu.size()) throw DimensionError("response and mean lengths differ");
  if (!mu.allFinite() || (mu.array() <= 0.0).any()) throw NumericalError("fitted means must be finite and positive");
  if (y.sum() <= 0.0) throw DispersionUndefinedError("dispersion undefined: every response is zero");

  const auto tail = exceedance_counts(y);
  double lo = std::log(kMinDispersion);
  double hi = std::log(kMaxDispersion);
  if (dispersion_score(tail, y, mu, kMaxDispersion).value >= 0.0) return kMaxDispersion;
  if (dispersion_score(tail, y, mu, kMinDispersion).value <= 0.0) return kMinDispersion;

  double u = 0.0;  // theta = 1
  for (int it = 0; it < 200; ++it) {
    const double theta = std::exp(u);
    const auto [s, ds] = dispersion_score(tail, y, mu, theta);
    if (s > 0.0) lo = u; else hi = u;
    double next = u;
    const double slope = theta * ds;
    if (slope < 0.0) next = u - s / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) < 1e-10 || hi - lo < 1e-12) return std::exp(next);
    u = next;
  }
  return std::exp(u);
}

double estimate_dispersion(const DesignMatrix& design, const Eigen::VectorXd& coefficients) {
  return estimate_dispersion(design.response, fitted_means(design, coefficients));
}

FittedBenefitModel fit_with_dispersion(const DesignMatrix& design, double lambda, const AlternationOptions& options,
                                       const FittedBenefitModel* warm) {
  double theta = warm ? warm->theta : 1.0;
  const Eigen::VectorXd* start = warm ? &warm->coefficients : nullptr;
  FittedBenefitModel model = fit(design, lambda, theta, options.irls, start);
  int rounds = 1;
  bool settled = false;
  for (; rounds <= options.max_rounds; ++rounds) {
    const double next = estimate_dispersion(design, model.coefficients);
    const bool done = std::abs(next - theta) <= options.theta_tolerance * theta;
    theta = next;
    model = fit(design, lambda, theta, options.irls, &model.coefficients);
    if (done) {
      settled = true;
      break;
    }
  }
  model.fit.dispersion_rounds = rounds;
  model.fit.converged = model.fit.converged && settled;
  return model;
}

std::vector<double> default_lambda_grid(const DesignMatrix& design, int count, double ratio) {
  if (count < 1) throw ConfigError("lambda grid needs at least one value");
  const Eigen::MatrixXd intercept = design.x.leftCols(1);
  Eigen::VectorXd beta0 = default_start(intercept, design.offset, design.response);
  double theta = 1.0;
  for (int round = 0; round < 50; ++round) {
    beta0 = irls(intercept, design.offset, design.response, 0.0, theta, beta0, {}).beta;
    const double next = estimate_dispersion(design.response, means_from(intercept, design.offset, beta0));
    const bool done = std::abs(next - theta) <= 1e-4 * theta;
    theta = next;
    if (done) break;
  }
  const Eigen::VectorXd mu = means_from(intercept, design.offset, beta0);
  const Eigen::VectorXd score =
      design.x.transpose() * ((design.response - mu).array() / (1.0 + mu.array() / theta)).matrix();
  double lambda_max = score.tail(score.size() - 1).cwiseAbs().maxCoeff() / (2.0 * kLambdaMaxStep);
  if (!(lambda_max > 0.0)) lambda_max = 1.0;

  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    grid[static_cast<std::size_t>(k)] = lambda_max * std::pow(ratio, frac);
  }
  return grid;
}

CvResult cross_validate_lambda(const DesignMatrix& design, int folds, std::vector<double> grid, std::uint64_t seed,
                               CvLoss loss) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  const Eigen::Index n = design.rows();
  if (n < folds) throw InsufficientDataError("fewer subjects than folds");
  std::sort(grid.begin(), grid.end(), std::greater<>());

  const auto k_folds = static_cast<std::size_t>(folds);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  bool ok = false;
  for (std::uint64_t attempt = 0; attempt < 10 && !ok; ++attempt) {
    Rng rng = stream_rng(seed, {0xC5F01D5ull, attempt});
    std::vector<Eigen::Index> arm0, arm1;
    for (Eigen::Index i = 0; i < n; ++i) (design.x(i, 1) == 0.0 ? arm0 : arm1).push_back(i);
    shuffle(arm0, rng);
    shuffle(arm1, rng);
    std::size_t pos = 0;
    for (auto i : arm0) fold_of[static_cast<std::size_t>(i)] = static_cast<int>(pos++ % k_folds);
    for (auto i : arm1) fold_of[static_cast<std::size_t>(i)] = static_cast<int>(pos++ % k_folds);

    std::vector<std::array<Eigen::Index, 2>> held(k_folds, {0, 0});
    for (Eigen::Index i = 0; i < n; ++i) {
      held[static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)])]
          [design.x(i, 1) == 0.0 ? 0 : 1]++;
    }
    const auto n0 = static_cast<Eigen::Index>(arm0.size());
    const auto n1 = static_cast<Eigen::Index>(arm1.size());
    ok = std::all_of(held.begin(), held.end(), [&](const auto& h) {
      return h[0] > 0 && h[1] > 0 && n0 - h[0] > 0 && n1 - h[1] > 0;
    });
  }
  if (!ok) throw InsufficientDataError("could not form folds with both treatment arms in every fold");

  const std::size_t g = grid.size();
  std::vector<std::vector<double>> fold_error(k_folds, std::vector<double>(g, 0.0));
  std::vector<double> total(g, 0.0);
  for (std::size_t f = 0; f < k_folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == static_cast<int>(f) ? test : train).push_back(i);
    }
    const DesignMatrix tr = design.subset(train);
    const DesignMatrix te = design.subset(test);
    FittedBenefitModel previous;
    bool has_previous = false;
    for (std::size_t l = 0; l < g; ++l) {
      FittedBenefitModel m = fit_with_dispersion(tr, grid[l], {}, has_previous ? &previous : nullptr);
      const Eigen::VectorXd mu = fitted_means(te, m.coefficients);
      double err = 0.0;
      if (loss == CvLoss::squared_error) {
        err = (te.response - mu).squaredNorm();
      } else {
        err = nb_deviance(te.response, mu, m.theta);
      }
      total[l] += err;
      fold_error[f][l] = err / static_cast<double>(test.size());
      previous = std::move(m);
      has_previous = true;
    }
  }

  CvResult out;
  out.lambda_grid = grid;
  out.cv_error.resize(g);
  out.cv_se.resize(g);
  for (std::size_t l = 0; l < g; ++l) {
    out.cv_error[l] = total[l] / static_cast<double>(n);
    double mean = 0.0;
    for (std::size_t f = 0; f < k_folds; ++f) mean += fold_error[f][l];
    mean /= static_cast<double>(k_folds);
    double ss = 0.0;
    for (std::size_t f = 0; f < k_folds; ++f) ss += (fold_error[f][l] - mean) * (fold_error[f][l] - mean);
    out.cv_se[l] = std::sqrt(ss / static_cast<double>(k_folds - 1) / static_cast<double>(k_folds));
  }
  // Grid is descending, so the first minimum is the largest penalty among ties.
  std::size_t best = 0;
  for (std::size_t l = 1; l < g; ++l) {
    if (out.cv_error[l] < out.cv_error[best]) best = l;
  }
  out.chosen_index = best;
  out.chosen_lambda = grid[best];
  out.fold_of = std::move(fold_of);
  return out;
}

Eigen::VectorXd predict_unit_rates(const FittedBenefitModel& model, const Eigen::MatrixXd& raw_covariates,
                                   int treatment) {
  const Eigen::Index m = model.covariate_count();
  if (raw_covariates.cols() != m) {
    throw DimensionError("expected " + std::to_string(m) + " covariates, got " +
                         std::to_string(raw_covariates.cols()));
  }
  const Eigen::MatrixXd z = model.scaling.apply(raw_covariates);
  const auto& b = model.coefficients;
  Eigen::VectorXd eta = (z * b.segment(2, m)).array() + b(0);
  if (treatment == 1) {
    eta += z * b.tail(m);
    eta.array() += b(1);
  }
  return eta.array().exp().matrix();
}

double predict_rate(const FittedBenefitModel& model, const Eigen::VectorXd& raw_covariates, int treatment,
                    double time) {
  if (raw_covariates.size() != model.covariate_count()) {
    throw DimensionError("expected " + std::to_string(model.covariate_count()) + " covariates, got " +
                         std::to_string(raw_covariates.size()));
  }
  if (treatment != 0 && treatment != 1) throw ConfigError("treatment must be 0 or 1");
  return predict_unit_rates(model, raw_covariates.transpose(), treatment)(0) * time;
}

std::string model_to_json(const FittedBenefitModel& model) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  auto& coefs = j["coefficients"] = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < model.coefficients.size(); ++k) {
    coefs.push_back({{"name", model.names[static_cast<std::size_t>(k)]}, {"value", model.coefficients(k)}});
  }
  j["theta"] = model.theta;
  j["lambda"] = model.lambda;
  auto& sc = j["scaling"];
  sc["covariates"] = model.covariate_names;
  sc["means"] = std::vector<double>(model.scaling.means.begin(), model.scaling.means.end());
  sc["sds"] = std::vector<double>(model.scaling.sds.begin(), model.scaling.sds.end());
  j["fit"] = {{"iterations", model.fit.iterations},
              {"converged", model.fit.converged},
              {"penalized_deviance", model.fit.penalized_deviance},
              {"dispersion_rounds", model.fit.dispersion_rounds}};
  return j.dump(2);
}

FittedBenefitModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    FittedBenefitModel model;
    const auto& coefs = j.at("coefficients");
    model.coefficients.resize(static_cast<Eigen::Index>(coefs.size()));
    for (std::size_t k = 0; k < coefs.size(); ++k) {
      model.names.push_back(coefs[k].at("name").get<std::string>());
      model.coefficients(static_cast<Eigen::Index>(k)) = coefs[k].at("value").get<double>();
    }
    model.theta = j.at("theta").get<double>();
    model.lambda = j.at("lambda").get<double>();
    const auto& sc = j.at("scaling");
    model.covariate_names = sc.at("covariates").get<std::vector<std::string>>();
    auto means = sc.at("means").get<std::vector<double>>();
    auto sds = sc.at("sds").get<std::vector<double>>();
    model.scaling.means = Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    model.scaling.sds = Eigen::Map<Eigen::VectorXd>(sds.data(), static_cast<Eigen::Index>(sds.size()));
    const auto m = static_cast<Eigen::Index>(model.covariate_names.size());
    if (model.scaling.means.size() != m || model.scaling.sds.size() != m || model.coefficients.size() != 2 * m + 2) {
      throw DimensionError("model file has inconsistent dimensions");
    }
    if (auto it = j.find("fit"); it != j.end()) {
      model.fit.iterations = it->value("iterations", 0);
      model.fit.converged = it->value("converged", true);
      model.fit.penalized_deviance = it->value("penalized_deviance", 0.0);
      model.fit.dispersion_rounds = it->value("dispersion_rounds", 0);
    } else {
      model.fit.converged = true;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model file is missing a field: ") + e.what());
  }
}

}  // namespace cbindex
