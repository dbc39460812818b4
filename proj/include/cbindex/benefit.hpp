#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbindex/errors.hpp"
#include "cbindex/random.hpp"

namespace cbindex {

class TrialDataset;
struct FittedBenefitModel;

enum class EstimatorKind { parametric, semiparametric };

/// How the pair-maximum expectation is formed from the sorted partial sums.
/// `with_replacement` averages max(b_i, b_j) over all n^2 ordered pairs and
/// is the default everywhere. The other two exist for sensitivity checks.
enum class PairMaxConvention { with_replacement, without_replacement, printed };

/// Per-subject benefit with its descending order (ties by original index
/// unless a tie seed was supplied).
template <typename Scalar>
struct BasicBenefitVector {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector values;
  std::vector<Eigen::Index> order;
  std::vector<std::string> ids;

  Eigen::Index size() const noexcept { return values.size(); }
  /// k-th largest value, k = 0..n-1.
  Scalar ranked(Eigen::Index k) const { return values(order[static_cast<std::size_t>(k)]); }
};

using BenefitVector = BasicBenefitVector<double>;

template <typename Scalar>
struct BasicCbEstimate {
  Scalar mean_benefit{};
  Scalar pair_max{};
  Scalar delta_b{};
  Scalar gini_b{};  ///< +inf when the mean benefit is exactly zero
  Scalar cb{};      ///< NaN when degenerate
  EstimatorKind kind = EstimatorKind::parametric;
  bool degenerate = false;    ///< pair-max estimate <= 0; cb undefined
  bool out_of_range = false;  ///< cb outside [0, 1]
};

using CbEstimate = BasicCbEstimate<double>;

template <typename Scalar>
struct BasicPartialSumCurve {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sums;  ///< sums(k-1) = S(k)
  EstimatorKind kind = EstimatorKind::parametric;
};

using PartialSumCurve = BasicPartialSumCurve<double>;

/// Indices sorted by value, largest first. Ties keep index order, or are
/// shuffled deterministically when `tie_seed` is given.
template <typename Derived>
std::vector<Eigen::Index> order_descending(const Eigen::MatrixBase<Derived>& values,
                                           std::optional<std::uint64_t> tie_seed = std::nullopt) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (!tie_seed) {
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
    return order;
  }
  std::vector<std::uint64_t> key(static_cast<std::size_t>(n));
  Rng rng = stream_rng(*tie_seed, {0x71E5ull});
  for (auto& k : key) k = rng();
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (values(a) != values(b)) return values(a) > values(b);
    const auto ka = key[static_cast<std::size_t>(a)];
    const auto kb = key[static_cast<std::size_t>(b)];
    return ka != kb ? ka < kb : a < b;
  });
  return order;
}

template <typename Derived>
BasicBenefitVector<typename Derived::Scalar> make_benefit_vector(const Eigen::MatrixBase<Derived>& values,
                                                                 std::vector<std::string> ids = {},
                                                                 std::optional<std::uint64_t> tie_seed = std::nullopt) {
  BasicBenefitVector<typename Derived::Scalar> bv;
  bv.values = values;
  bv.order = order_descending(bv.values, tie_seed);
  if (ids.empty()) {
    ids.reserve(static_cast<std::size_t>(bv.values.size()));
    for (Eigen::Index i = 0; i < bv.values.size(); ++i) ids.push_back(std::to_string(i + 1));
  }
  if (static_cast<Eigen::Index>(ids.size()) != bv.values.size()) throw DimensionError("id count does not match benefits");
  bv.ids = std::move(ids);
  return bv;
}

template <typename Scalar>
Scalar mean_benefit(const BasicBenefitVector<Scalar>& bv) {
  if (bv.size() < 1) throw InsufficientDataError("mean benefit needs at least one subject");
  return bv.values.sum() / static_cast<Scalar>(bv.size());
}

/// Parametric running sums S(k) of the benefits taken largest first.
template <typename Scalar>
BasicPartialSumCurve<Scalar> parametric_partial_sums(const BasicBenefitVector<Scalar>& bv) {
  BasicPartialSumCurve<Scalar> curve;
  curve.kind = EstimatorKind::parametric;
  curve.sums.resize(bv.size());
  Scalar running{0};
  for (Eigen::Index k = 0; k < bv.size(); ++k) {
    running += bv.ranked(k);
    curve.sums(k) = running;
  }
  return curve;
}

/// E{max(B1, B2)} from running sums S(k) and a mean estimate, for n subjects.
template <typename Scalar>
Scalar pair_max_from_partial_sums(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& sums, Scalar mean,
                                  PairMaxConvention convention = PairMaxConvention::with_replacement) {
  const auto n = static_cast<Scalar>(sums.size());
  const Scalar total = sums.sum();
  switch (convention) {
    case PairMaxConvention::with_replacement:
      return Scalar(2) * total / (n * n) - mean / n;
    case PairMaxConvention::without_replacement:
      return (Scalar(2) * total - Scalar(2) * n * mean) / (n * (n - Scalar(1)));
    case PairMaxConvention::printed:
      return Scalar(2) * (total / (n * n) - mean / n);
  }
  throw std::logic_error("unknown pair-max convention");
}

template <typename Scalar>
Scalar pair_max_parametric(const BasicBenefitVector<Scalar>& bv,
                           PairMaxConvention convention = PairMaxConvention::with_replacement) {
  if (bv.size() < 2) throw InsufficientDataError("pair maximum needs at least two subjects");
  return pair_max_from_partial_sums<Scalar>(parametric_partial_sums(bv).sums, mean_benefit(bv), convention);
}

/// Half the mean absolute difference over all n^2 ordered pairs, from the
/// gaps between consecutive order statistics: (1/n^2) sum k(n-k) gap_k.
/// Exactly zero for constant input.
template <typename Scalar>
Scalar delta_b(const BasicBenefitVector<Scalar>& bv) {
  const Eigen::Index n = bv.size();
  if (n < 2) throw InsufficientDataError("delta_b needs at least two subjects");
  Scalar acc{0};
  for (Eigen::Index k = 1; k < n; ++k) {
    const Scalar gap = bv.ranked(k - 1) - bv.ranked(k);
    acc += static_cast<Scalar>(k) * static_cast<Scalar>(n - k) * gap;
  }
  const auto nn = static_cast<Scalar>(n);
  return acc / (nn * nn);
}

template <typename Scalar>
Scalar gini_b(const BasicBenefitVector<Scalar>& bv) {
  const Scalar delta = delta_b(bv);
  const Scalar mean = mean_benefit(bv);
  if (mean == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return delta / mean;
}

/// Model-based concentration-of-benefit index. Throws OrientationError when
/// the average benefit is negative.
template <typename Scalar>
BasicCbEstimate<Scalar> cb_parametric(const BasicBenefitVector<Scalar>& bv) {
  if (bv.size() < 2) throw InsufficientDataError("C_b needs at least two subjects");
  BasicCbEstimate<Scalar> est;
  est.kind = EstimatorKind::parametric;
  est.mean_benefit = mean_benefit(bv);
  if (est.mean_benefit < Scalar(0)) {
    throw OrientationError("average benefit is negative (" + std::to_string(static_cast<double>(est.mean_benefit)) +
                           "); swap the treatment labels");
  }
  est.pair_max = est.mean_benefit + delta_b(bv);
  if (!(est.pair_max > Scalar(0))) throw EstimatorUndefinedError("benefit is identically zero; C_b undefined");
  est.delta_b = est.pair_max - est.mean_benefit;
  est.gini_b = est.mean_benefit == Scalar(0) ? std::numeric_limits<Scalar>::infinity() : est.delta_b / est.mean_benefit;
  est.cb = Scalar(1) - est.mean_benefit / est.pair_max;
  if (std::isfinite(static_cast<double>(est.gini_b))) {
    const Scalar via_gini = est.gini_b / (Scalar(1) + est.gini_b);
    if (std::abs(static_cast<double>(via_gini - est.cb)) > 1e-12) {
      throw std::logic_error("C_b and Gini routes disagree");
    }
  }
  est.out_of_range = est.cb < Scalar(0) || est.cb > Scalar(1);
  return est;
}

/// Population benefit when the top fraction p is treated:
/// (1/n) * integral of the empirical quantile function over the top p,
/// i.e. S(k)/n at p = k/n with linear interpolation in between.
template <typename Scalar>
std::vector<Scalar> benefit_curve(const BasicBenefitVector<Scalar>& bv, const std::vector<Scalar>& grid) {
  if (grid.empty()) throw ConfigError("benefit curve grid is empty");
  if (bv.size() < 1) throw InsufficientDataError("benefit curve needs at least one subject");
  if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("benefit curve grid must be ascending");
  if (!(grid.front() > Scalar(0)) || grid.back() > Scalar(1)) throw ConfigError("grid values must lie in (0, 1]");

  const Eigen::Index n = bv.size();
  const auto sums = parametric_partial_sums(bv).sums;
  const auto nn = static_cast<Scalar>(n);
  std::vector<Scalar> out;
  out.reserve(grid.size());
  for (Scalar p : grid) {
    const Scalar pos = p * nn;
    auto k = static_cast<Eigen::Index>(std::floor(static_cast<double>(pos)));
    k = std::clamp<Eigen::Index>(k, 0, n);
    Scalar value = k > 0 ? sums(k - 1) : Scalar(0);
    if (k < n) value += (pos - static_cast<Scalar>(k)) * bv.ranked(k);
    out.push_back(value / nn);
  }
  return out;
}

/// Trapezoid integral of a curve sampled on `grid`, anchored at (0, 0).
template <typename Scalar>
Scalar integrate_from_origin(const std::vector<Scalar>& grid, const std::vector<Scalar>& values) {
  if (grid.size() != values.size()) throw DimensionError("grid and values differ in length");
  Scalar area{0};
  Scalar prev_p{0};
  Scalar prev_v{0};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    area += (grid[i] - prev_p) * (values[i] + prev_v) / Scalar(2);
    prev_p = grid[i];
    prev_v = values[i];
  }
  return area;
}

/// b_i = E(Y | x_i, A=0) - E(Y | x_i, A=1) at one year of follow-up.
BenefitVector predicted_benefit(const FittedBenefitModel& model, const TrialDataset& d,
                                std::optional<std::uint64_t> tie_seed = std::nullopt);

/// Observed person-time rate difference within the top-k subjects ranked by
/// `bv`, times k. An arm with no members among the first k takes its first
/// defined running rate.
PartialSumCurve semiparametric_partial_sums(const TrialDataset& d, const BenefitVector& bv);

/// Semi-parametric C_b: mean benefit is the observed rate difference between
/// arms; the pair maximum uses the observed running sums. Out-of-range
/// values are returned raw and flagged.
CbEstimate cb_semiparametric(const TrialDataset& d, const BenefitVector& bv,
                             PairMaxConvention convention = PairMaxConvention::with_replacement);

/// Parametric or semi-parametric C_b for `bv` evaluated on `d`.
CbEstimate estimate_cb(EstimatorKind kind, const TrialDataset& d, const BenefitVector& bv);

const char* to_string(EstimatorKind kind);

}  // namespace cbindex
