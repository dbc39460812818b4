#include "cbindex/benefit.hpp"

#include "cbindex/nbglm.hpp"
#include "cbindex/trial_data.hpp"

namespace cbindex {

BenefitVector predicted_benefit(const FittedBenefitModel& model, const TrialDataset& d,
                                std::optional<std::uint64_t> tie_seed) {
  if (d.covariate_count() != model.covariate_count()) {
    throw DimensionError("dataset has " + std::to_string(d.covariate_count()) + " covariates, model expects " +
                         std::to_string(model.covariate_count()));
  }
  const Eigen::VectorXd untreated = predict_unit_rates(model, d.covariates(), 0);
  const Eigen::VectorXd treated = predict_unit_rates(model, d.covariates(), 1);
  return make_benefit_vector(untreated - treated, d.ids(), tie_seed);
}

PartialSumCurve semiparametric_partial_sums(const TrialDataset& d, const BenefitVector& bv) {
  const Eigen::Index n = d.size();
  if (bv.size() != n) throw DimensionError("benefit vector and dataset differ in length");
  d.require_both_arms();

  Eigen::Matrix<double, Eigen::Dynamic, 2> rate(n, 2);
  double events[2] = {0.0, 0.0};
  double exposure[2] = {0.0, 0.0};
  Eigen::Index first_defined[2] = {-1, -1};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = bv.order[static_cast<std::size_t>(k)];
    const int arm = d.treatment()(i);
    events[arm] += d.events()(i);
    exposure[arm] += d.time()(i);
    if (first_defined[arm] < 0) first_defined[arm] = k;
    for (int a : {0, 1}) rate(k, a) = exposure[a] > 0.0 ? events[a] / exposure[a] : 0.0;
  }
  for (int a : {0, 1}) {
    for (Eigen::Index k = 0; k < first_defined[a]; ++k) rate(k, a) = rate(first_defined[a], a);
  }

  PartialSumCurve curve;
  curve.kind = EstimatorKind::semiparametric;
  curve.sums.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    curve.sums(k) = static_cast<double>(k + 1) * (rate(k, 0) - rate(k, 1));
  }
  return curve;
}

CbEstimate cb_semiparametric(const TrialDataset& d, const BenefitVector& bv, PairMaxConvention convention) {
  const PartialSumCurve curve = semiparametric_partial_sums(d, bv);
  const Eigen::Index n = d.size();

  CbEstimate est;
  est.kind = EstimatorKind::semiparametric;
  est.mean_benefit = curve.sums(n - 1) / static_cast<double>(n);
  est.pair_max = pair_max_from_partial_sums<double>(curve.sums, est.mean_benefit, convention);
  est.delta_b = est.pair_max - est.mean_benefit;
  est.gini_b = est.mean_benefit == 0.0 ? std::numeric_limits<double>::infinity() : est.delta_b / est.mean_benefit;
  if (!(est.pair_max > 0.0)) {
    est.degenerate = true;
    est.cb = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  est.cb = 1.0 - est.mean_benefit / est.pair_max;
  est.out_of_range = est.cb < 0.0 || est.cb > 1.0;
  return est;
}

CbEstimate estimate_cb(EstimatorKind kind, const TrialDataset& d, const BenefitVector& bv) {
  return kind == EstimatorKind::parametric ? cb_parametric(bv) : cb_semiparametric(d, bv);
}

const char* to_string(EstimatorKind kind) {
  return kind == EstimatorKind::parametric ? "parametric" : "semiparametric";
}

}  // namespace cbindex
