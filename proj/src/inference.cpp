#include "cbindex/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "cbindex/errors.hpp"
#include "cbindex/parallel.hpp"
#include "cbindex/random.hpp"

namespace cbindex {

namespace {

constexpr std::uint64_t kOriginalStream = 0x0216ull;
constexpr std::uint64_t kReplicateStream = 0xB007ull;
constexpr std::array<EstimatorKind, 2> kKinds{EstimatorKind::parametric, EstimatorKind::semiparametric};

std::optional<CbEstimate> try_estimate(EstimatorKind kind, const TrialDataset& d, const BenefitPredictor& predict) {
  try {
    CbEstimate est = estimate_cb(kind, d, predict(d));
    if (est.degenerate) return std::nullopt;
    return est;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void validate(const BootstrapConfig& cfg) {
  if (cfg.replicates < 2) throw ConfigError("bootstrap needs at least 2 replicates");
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
}

}  // namespace

Pipeline make_nb_pipeline(const NbPipelineOptions& options) {
  Pipeline p;
  p.train = [options](const TrialDataset& d, std::uint64_t seed, std::optional<double> fixed_lambda) {
    d.require_both_arms();
    const DesignMatrix design = prepare_design(d);
    double lambda = 0.0;
    if (options.model == ModelKind::ridge) {
      if (fixed_lambda) {
        lambda = *fixed_lambda;
      } else {
        auto grid = default_lambda_grid(design, options.grid_size, options.grid_ratio);
        lambda = cross_validate_lambda(design, options.folds, std::move(grid), seed, options.loss).chosen_lambda;
      }
    }
    auto model = std::make_shared<const FittedBenefitModel>(fit_with_dispersion(design, lambda));
    if (!model->fit.converged) throw NumericalError("benefit model did not converge");
    TrainedModel out;
    out.lambda = options.model == ModelKind::ridge ? std::optional<double>(lambda) : std::nullopt;
    out.model = model;
    out.predict = [model](const TrialDataset& data) { return predicted_benefit(*model, data); };
    return out;
  };
  return p;
}

double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InsufficientDataError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::vector<Eigen::Index> bootstrap_indices(const TrialDataset& d, Rng& rng, bool stratify_by_arm) {
  const Eigen::Index n = d.size();
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(n));
  if (!stratify_by_arm) {
    for (Eigen::Index i = 0; i < n; ++i) {
      rows.push_back(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n))));
    }
    return rows;
  }
  for (int arm : {0, 1}) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d.treatment()(i) == arm) members.push_back(i);
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      rows.push_back(members[uniform_index(rng, members.size())]);
    }
  }
  return rows;
}

namespace {

// Original-sample estimates per kind; a failing kind keeps its exception.
struct OriginalEstimates {
  std::array<std::optional<CbEstimate>, 2> estimate;
  std::array<std::exception_ptr, 2> error;

  const CbEstimate& require(std::size_t k) const {
    if (error[k]) std::rethrow_exception(error[k]);
    if (estimate[k]->degenerate) throw EstimatorUndefinedError("C_b is degenerate on the original sample");
    return *estimate[k];
  }
};

OriginalEstimates estimate_original(const TrialDataset& d, const BenefitPredictor& predict) {
  OriginalEstimates o;
  const BenefitVector bv = predict(d);
  for (std::size_t k = 0; k < 2; ++k) {
    try {
      o.estimate[k] = estimate_cb(kKinds[k], d, bv);
    } catch (const Error&) {
      o.error[k] = std::current_exception();
    }
  }
  return o;
}

std::array<IntervalEstimate, 2> bootstrap_impl(const TrialDataset& d, const Pipeline& pipeline,
                                               const BootstrapConfig& cfg, const TrainedModel* original,
                                               OriginalEstimates& originals) {
  validate(cfg);
  TrainedModel trained_original;
  if (!original) {
    trained_original = pipeline.train(d, stream_seed(cfg.seed, {kOriginalStream}), std::nullopt);
    original = &trained_original;
  }
  originals = estimate_original(d, original->predict);
  std::array<IntervalEstimate, 2> out;
  for (std::size_t k = 0; k < 2; ++k) {
    out[k].point = originals.estimate[k] ? originals.estimate[k]->cb : std::numeric_limits<double>::quiet_NaN();
  }
  const std::optional<double> fixed = cfg.refit_shrinkage ? std::nullopt : original->lambda;

  const auto reps = static_cast<std::size_t>(cfg.replicates);
  std::vector<std::array<std::optional<double>, 2>> values(reps);
  parallel_for(reps, cfg.workers, [&](std::size_t r) {
    Rng rng = stream_rng(cfg.seed, {kReplicateStream, r});
    const TrialDataset sample = d.select(bootstrap_indices(d, rng, cfg.stratify_by_arm));
    const std::uint64_t train_seed = rng();
    TrainedModel trained;
    try {
      trained = pipeline.train(sample, train_seed, fixed);
    } catch (const Error&) {
      return;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto est = try_estimate(kKinds[k], sample, trained.predict)) values[r][k] = est->cb;
    }
  });

  const double alpha = (1.0 - cfg.ci_level) / 2.0;
  for (std::size_t k = 0; k < 2; ++k) {
    auto& iv = out[k];
    for (const auto& v : values) {
      if (v[k]) iv.replicate_values.push_back(*v[k]);
      else ++iv.n_failed;
    }
    if (iv.replicate_values.empty()) {
      iv.lower = iv.upper = std::numeric_limits<double>::quiet_NaN();
      iv.reliability_warning = true;
      continue;
    }
    iv.lower = nearest_rank_percentile(iv.replicate_values, alpha);
    iv.upper = nearest_rank_percentile(iv.replicate_values, 1.0 - alpha);
    iv.reliability_warning = static_cast<double>(iv.n_failed) > 0.2 * static_cast<double>(reps);
  }
  return out;
}

}  // namespace

std::array<IntervalEstimate, 2> bootstrap_ci_both(const TrialDataset& d, const Pipeline& pipeline,
                                                  const BootstrapConfig& cfg, const TrainedModel* original) {
  OriginalEstimates originals;
  return bootstrap_impl(d, pipeline, cfg, original, originals);
}

IntervalEstimate bootstrap_ci(const TrialDataset& d, const Pipeline& pipeline, EstimatorKind kind,
                              const BootstrapConfig& cfg) {
  OriginalEstimates originals;
  auto both = bootstrap_impl(d, pipeline, cfg, nullptr, originals);
  const std::size_t k = kind == EstimatorKind::parametric ? 0 : 1;
  originals.require(k);
  return both[k];
}

namespace {

std::array<OptimismResult, 2> optimism_impl(const TrialDataset& d, const Pipeline& pipeline,
                                            const BootstrapConfig& cfg, const TrainedModel* original,
                                            OriginalEstimates& originals) {
  validate(cfg);
  TrainedModel trained_original;
  if (!original) {
    trained_original = pipeline.train(d, stream_seed(cfg.seed, {kOriginalStream}), std::nullopt);
    original = &trained_original;
  }
  originals = estimate_original(d, original->predict);
  const std::optional<double> fixed = cfg.refit_shrinkage ? std::nullopt : original->lambda;
  std::array<OptimismResult, 2> out;
  for (std::size_t k = 0; k < 2; ++k) {
    if (originals.estimate[k]) {
      out[k].original = *originals.estimate[k];
    } else {
      out[k].original.kind = kKinds[k];
      out[k].original.degenerate = true;
      out[k].original.cb = std::numeric_limits<double>::quiet_NaN();
    }
    out[k].experimental = kKinds[k] == EstimatorKind::parametric;
  }

  const auto reps = static_cast<std::size_t>(cfg.replicates);
  std::vector<std::array<std::optional<double>, 2>> diffs(reps);
  parallel_for(reps, cfg.workers, [&](std::size_t r) {
    Rng rng = stream_rng(cfg.seed, {kReplicateStream, r});
    const TrialDataset sample = d.select(bootstrap_indices(d, rng, cfg.stratify_by_arm));
    const std::uint64_t train_seed = rng();
    TrainedModel trained;
    try {
      trained = pipeline.train(sample, train_seed, fixed);
    } catch (const Error&) {
      return;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      auto within = try_estimate(kKinds[k], sample, trained.predict);
      auto outside = try_estimate(kKinds[k], d, trained.predict);
      if (within && outside) diffs[r][k] = within->cb - outside->cb;
    }
  });

  for (std::size_t k = 0; k < 2; ++k) {
    auto& res = out[k];
    for (const auto& v : diffs) {
      if (v[k]) res.differences.push_back(*v[k]);
      else ++res.n_failed;
    }
    if (res.differences.empty()) {
      res.optimism = std::numeric_limits<double>::quiet_NaN();
    } else {
      double sum = 0.0;
      for (double x : res.differences) sum += x;
      res.optimism = sum / static_cast<double>(res.differences.size());
    }
    res.adjusted = res.original.cb - res.optimism;
  }
  return out;
}

}  // namespace

std::array<OptimismResult, 2> optimism_adjust_both(const TrialDataset& d, const Pipeline& pipeline,
                                                   const BootstrapConfig& cfg, const TrainedModel* original) {
  OriginalEstimates originals;
  return optimism_impl(d, pipeline, cfg, original, originals);
}

OptimismResult optimism_adjust(const TrialDataset& d, const Pipeline& pipeline, EstimatorKind kind,
                               const BootstrapConfig& cfg) {
  OriginalEstimates originals;
  auto both = optimism_impl(d, pipeline, cfg, nullptr, originals);
  const std::size_t k = kind == EstimatorKind::parametric ? 0 : 1;
  originals.require(k);
  return both[k];
}

}  // namespace cbindex
