#pragma once

// Chi-squared distance calibration: find factors a_i so that
//   sum_i d_i a_i y_i = t(y)
// while minimising sum_i (d_i a_i - d_i)^2 / (d_i c_i).
// The analytic solution is a_i = 1 + c_i y_i' lambda with
//   (sum_i d_i c_i y_i y_i') lambda = t(y) - sum_i d_i y_i.
// Bounded and ridge variants iterate on that closed form.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tailcal/error.hpp"

namespace tailcal {

template <typename Scalar>
struct CalibrationProblemT {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector base_weights;  // d_i > 0, length n
  Matrix aux;           // n x k, row i is y_i'
  Vector targets;       // t(y), length k
  Vector constants;     // c_i > 0; empty means all ones
  std::optional<std::pair<Scalar, Scalar>> bounds;  // (L, U) on a_i
  Vector ridge_tolerances;  // tau_r per constraint; empty means exact
  std::vector<std::string> labels;  // optional constraint names

  Eigen::Index units() const { return base_weights.size(); }
  Eigen::Index constraints() const { return targets.size(); }
  Scalar constant(Eigen::Index i) const { return constants.size() == 0 ? Scalar(1) : constants(i); }

  void validate() const {
    const Eigen::Index n = units();
    if (aux.rows() != n || (constants.size() != 0 && constants.size() != n))
      throw Error(ErrorCode::InvalidArgument, "calibration arrays must have one entry per unit");
    if (targets.size() < 1 || aux.cols() != targets.size())
      throw Error(ErrorCode::InvalidArgument, "calibration needs k >= 1 targets matching aux columns");
    if (ridge_tolerances.size() != 0 && ridge_tolerances.size() != targets.size())
      throw Error(ErrorCode::InvalidArgument, "ridge tolerances must have one entry per constraint");
    for (Eigen::Index r = 0; r < targets.size(); ++r)
      if (!std::isfinite(static_cast<double>(targets(r))))
        throw Error(ErrorCode::InvalidArgument, "calibration targets must be finite");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(base_weights(i) > 0)) throw Error(ErrorCode::NonPositiveWeight, "base weights must be positive");
      if (!(constant(i) > 0)) throw Error(ErrorCode::InvalidArgument, "calibration constants must be positive");
    }
    if (bounds) {
      const auto [lo, hi] = *bounds;
      if (!(lo >= 0 && lo < 1 && hi > 1)) throw Error(ErrorCode::InvalidArgument, "bounds must satisfy 0 <= L < 1 < U");
    }
    for (Eigen::Index r = 0; r < ridge_tolerances.size(); ++r)
      if (!(std::abs(ridge_tolerances(r)) < 1))
        throw Error(ErrorCode::InvalidArgument, "ridge tolerances must lie in (-1, 1)");
  }
};

template <typename Scalar>
struct CalibrationResultT {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector factors;      // a_i
  Vector new_weights;  // d_i a_i
  Vector multipliers;  // lambda, in the units of the original aux columns
  Vector residuals;    // sum_i d*_i y_ir - t_r
  int iterations = 0;
  bool converged = false;
  bool negative_weights = false;
  Eigen::Index rank = 0;
  std::vector<std::string> warnings;

  /// residual_r / t_r, with a zero target measured against the HT scale.
  Vector relative_residuals;
};

using CalibrationProblem = CalibrationProblemT<double>;
using CalibrationResult = CalibrationResultT<double>;

struct KktDiagnostics {
  double stationarity = 0.0;  // max_i |a_i - 1 - c_i y_i' lambda|
  Eigen::VectorXd residuals;
};

inline constexpr double kExactTolerance = 1e-8;
inline constexpr double kBoundedTolerance = 1e-6;
inline constexpr int kMaxBoundedIterations = 50;
inline constexpr std::pair<double, double> kDefaultWeightBounds{0.1, 10.0};

namespace detail {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-constraint scale for relative residuals: max(|t_r|, sum_i d_i |y_ir|).
template <typename Scalar>
Vec<Scalar> residual_scale(const CalibrationProblemT<Scalar>& p) {
  const Eigen::Index k = p.constraints();
  Vec<Scalar> scale(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    Scalar ht = (p.base_weights.array() * p.aux.col(r).array().abs()).sum();
    scale(r) = std::max({std::abs(p.targets(r)), ht, std::numeric_limits<Scalar>::min()});
  }
  return scale;
}

template <typename Scalar>
void finish(const CalibrationProblemT<Scalar>& p, CalibrationResultT<Scalar>& res) {
  res.new_weights = p.base_weights.cwiseProduct(res.factors);
  res.residuals = p.aux.transpose() * res.new_weights - p.targets;
  const Vec<Scalar> scale = residual_scale(p);
  res.relative_residuals = res.residuals.cwiseQuotient(scale);
  res.negative_weights = (res.factors.array() < 0).any();
  if (res.negative_weights) res.warnings.emplace_back("NegativeWeightProduced: some adjustment factors are negative");
}

/// One closed-form solve with some units frozen at given factors.
/// `ridge` (length k, scaled units) adds diag(ridge) to the Gram matrix;
/// zero entries are exact constraints. Returns the factors of all units and
/// the multipliers in original units.
template <typename Scalar>
struct FreeSolve {
  Vec<Scalar> factors;
  Vec<Scalar> multipliers;
  Eigen::Index rank = 0;
};

template <typename Scalar>
FreeSolve<Scalar> solve_free(const CalibrationProblemT<Scalar>& p, const std::vector<bool>& frozen,
                             const Vec<Scalar>& frozen_factors, const Vec<Scalar>& ridge) {
  const Eigen::Index n = p.units();
  const Eigen::Index k = p.constraints();

  // Jacobi scaling of the free-set Gram matrix: unit diagonal where nonzero.
  Vec<Scalar> col_scale = Vec<Scalar>::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (frozen[static_cast<std::size_t>(i)]) continue;
    const Scalar dc = p.base_weights(i) * p.constant(i);
    col_scale += (dc * p.aux.row(i).transpose().array().square()).matrix();
  }
  for (Eigen::Index r = 0; r < k; ++r) col_scale(r) = col_scale(r) > 0 ? std::sqrt(col_scale(r)) : Scalar(1);

  Mat<Scalar> gram = Mat<Scalar>::Zero(k, k);
  Vec<Scalar> gap = p.targets;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar d = p.base_weights(i);
    if (frozen[static_cast<std::size_t>(i)]) {
      gap -= d * frozen_factors(i) * p.aux.row(i).transpose();
      continue;
    }
    const Vec<Scalar> y = p.aux.row(i).transpose().cwiseQuotient(col_scale);
    gram.noalias() += (d * p.constant(i)) * y * y.transpose();
    gap -= d * p.aux.row(i).transpose();
  }
  const Vec<Scalar> scaled_gap = gap.cwiseQuotient(col_scale);
  if (ridge.size() == k) gram.diagonal() += ridge;

  Eigen::CompleteOrthogonalDecomposition<Mat<Scalar>> cod;
  cod.setThreshold(Scalar(1e-11));
  cod.compute(gram);
  Vec<Scalar> lambda = cod.solve(scaled_gap);
  // one step of iterative refinement
  const Vec<Scalar> correction = cod.solve(Vec<Scalar>(scaled_gap - gram * lambda));
  lambda += correction;

  FreeSolve<Scalar> out;
  out.rank = cod.rank();
  out.multipliers = lambda.cwiseQuotient(col_scale);
  out.factors = frozen_factors;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (frozen[static_cast<std::size_t>(i)]) continue;
    out.factors(i) = Scalar(1) + p.constant(i) * p.aux.row(i).dot(out.multipliers);
  }
  return out;
}

template <typename Scalar>
bool constraints_met(const CalibrationProblemT<Scalar>& p, const CalibrationResultT<Scalar>& res, double tol) {
  const bool relaxed = p.ridge_tolerances.size() == p.constraints();
  for (Eigen::Index r = 0; r < p.constraints(); ++r) {
    const double rel = std::abs(static_cast<double>(res.relative_residuals(r)));
    const double band = relaxed ? std::abs(static_cast<double>(p.ridge_tolerances(r))) : 0.0;
    if (band > 0) {
      const double t = std::abs(static_cast<double>(p.targets(r)));
      const double vs_target = t > 0 ? std::abs(static_cast<double>(res.residuals(r))) / t : rel;
      if (vs_target > band * (1 + 1e-9) + tol) return false;
    } else if (rel > tol) {
      return false;
    }
  }
  return true;
}

/// Restricted chi-squared iteration: solve, clamp violators to the bounds,
/// freeze them and re-solve on the remaining units.
template <typename Scalar>
CalibrationResultT<Scalar> clamp_loop(const CalibrationProblemT<Scalar>& p, const Vec<Scalar>& ridge,
                                      double tol) {
  const Eigen::Index n = p.units();
  const auto [lo, hi] = p.bounds.value_or(std::pair<Scalar, Scalar>{-std::numeric_limits<Scalar>::infinity(),
                                                                     std::numeric_limits<Scalar>::infinity()});
  std::vector<bool> frozen(static_cast<std::size_t>(n), false);
  Vec<Scalar> fixed = Vec<Scalar>::Ones(n);
  CalibrationResultT<Scalar> res;
  Eigen::Index free_count = n;

  for (int iter = 0;; ++iter) {
    FreeSolve<Scalar> s = solve_free(p, frozen, fixed, ridge);
    res.factors = s.factors;
    res.multipliers = s.multipliers;
    res.rank = s.rank;
    res.iterations = iter;

    Eigen::Index clamped_now = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (frozen[static_cast<std::size_t>(i)]) continue;
      const Scalar a = s.factors(i);
      if (a < lo || a > hi) {
        fixed(i) = a < lo ? lo : hi;
        frozen[static_cast<std::size_t>(i)] = true;
        ++clamped_now;
      }
    }
    if (clamped_now == 0) break;
    free_count -= clamped_now;
    res.factors = fixed;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!frozen[static_cast<std::size_t>(i)]) res.factors(i) = s.factors(i);
    if (free_count == 0) {
      res.iterations = iter + 1;
      finish(p, res);
      if (!constraints_met(p, res, tol))
        throw Error(ErrorCode::NoFeasibleSolution, "every unit reached a bound while constraints remain unmet");
      res.converged = true;
      return res;
    }
    if (iter + 1 >= kMaxBoundedIterations) {
      res.iterations = iter + 1;
      finish(p, res);
      res.converged = constraints_met(p, res, tol);
      if (!res.converged) res.warnings.emplace_back("bounded calibration stopped at the iteration limit");
      return res;
    }
  }
  finish(p, res);
  res.converged = constraints_met(p, res, tol);
  return res;
}

template <typename Scalar>
void note_rank(const CalibrationProblemT<Scalar>& p, CalibrationResultT<Scalar>& res) {
  if (res.rank < p.constraints())
    res.warnings.emplace_back("RankDeficiency: Gram matrix rank " + std::to_string(res.rank) + " < " +
                              std::to_string(p.constraints()) + " constraints; minimum-norm multipliers used");
}

}  // namespace detail

/// Analytic chi-squared calibration. Rank-deficient but consistent systems
/// are solved with minimum-norm multipliers and a RankDeficiency warning;
/// inconsistent ones raise SingularGram.
template <typename Scalar>
CalibrationResultT<Scalar> solve_chi2(const CalibrationProblemT<Scalar>& p) {
  p.validate();
  const Eigen::Index n = p.units();
  std::vector<bool> frozen(static_cast<std::size_t>(n), false);
  detail::Vec<Scalar> ones = detail::Vec<Scalar>::Ones(n);
  auto s = detail::solve_free(p, frozen, ones, detail::Vec<Scalar>());
  CalibrationResultT<Scalar> res;
  res.factors = s.factors;
  res.multipliers = s.multipliers;
  res.rank = s.rank;
  detail::finish(p, res);
  if (!detail::constraints_met(p, res, kExactTolerance)) {
    if (res.rank < p.constraints())
      throw Error(ErrorCode::SingularGram, "Gram matrix is singular and the targets are inconsistent");
    throw Error(ErrorCode::SingularGram, "Gram matrix is numerically singular");
  }
  detail::note_rank(p, res);
  res.converged = true;
  return res;
}

/// Chi-squared calibration with range restrictions L <= a_i <= U.
template <typename Scalar>
CalibrationResultT<Scalar> solve_bounded(const CalibrationProblemT<Scalar>& p) {
  p.validate();
  if (!p.bounds) throw Error(ErrorCode::InvalidArgument, "solve_bounded requires bounds");
  if (p.units() == 0) throw Error(ErrorCode::NoFeasibleSolution, "no units to calibrate");
  CalibrationProblemT<Scalar> exact = p;
  exact.ridge_tolerances.resize(0);
  auto res = detail::clamp_loop(exact, detail::Vec<Scalar>(), kBoundedTolerance);
  if (!res.converged && res.iterations < kMaxBoundedIterations)
    throw Error(ErrorCode::NoFeasibleSolution, "free units cannot meet the remaining constraints");
  detail::note_rank(exact, res);
  return res;
}

/// Ridge calibration: constraint r only has to hold within
/// |residual_r / t_r| <= |tau_r|. The per-constraint penalty is
/// rho * |tau_r|; the largest rho whose solution stays inside every band is
/// found by bisection on log(rho), so weights move as little as possible.
template <typename Scalar>
CalibrationResultT<Scalar> solve_ridge(const CalibrationProblemT<Scalar>& p) {
  p.validate();
  const Eigen::Index k = p.constraints();
  const bool any_relaxed = p.ridge_tolerances.size() == k && (p.ridge_tolerances.array() != 0).any();
  if (!any_relaxed) {
    CalibrationProblemT<Scalar> exact = p;
    exact.ridge_tolerances.resize(0);
    return p.bounds ? solve_bounded(exact) : solve_chi2(exact);
  }
  if (p.units() == 0) throw Error(ErrorCode::NoFeasibleSolution, "no units to calibrate");

  // Targets in the Jacobi-scaled space used by solve_free, so that the
  // penalty is comparable across constraints.
  detail::Vec<Scalar> col_scale = detail::Vec<Scalar>::Zero(k);
  for (Eigen::Index i = 0; i < p.units(); ++i)
    col_scale += ((p.base_weights(i) * p.constant(i)) * p.aux.row(i).transpose().array().square()).matrix();
  for (Eigen::Index r = 0; r < k; ++r) col_scale(r) = col_scale(r) > 0 ? std::sqrt(col_scale(r)) : Scalar(1);

  auto evaluate = [&](double log_rho) -> std::optional<CalibrationResultT<Scalar>> {
    detail::Vec<Scalar> ridge(k);
    const Scalar rho = static_cast<Scalar>(std::pow(10.0, log_rho));
    for (Eigen::Index r = 0; r < k; ++r) {
      const Scalar tau = std::abs(p.ridge_tolerances(r));
      const Scalar scaled_target = std::max(std::abs(p.targets(r)) / col_scale(r), Scalar(1e-300));
      // residual penalty 1/(rho tau t_r^2) enters the Gram diagonal inverted
      ridge(r) = rho * tau * scaled_target * scaled_target;
    }
    try {
      auto res = detail::clamp_loop(p, ridge, kBoundedTolerance);
      if (!detail::constraints_met(p, res, kBoundedTolerance)) return std::nullopt;
      return res;
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  constexpr double kLogHi = 16.0;
  constexpr double kLogLo = -16.0;
  if (auto hi = evaluate(kLogHi)) {
    detail::note_rank(p, *hi);
    hi->converged = true;
    return *hi;
  }
  auto lo = evaluate(kLogLo);
  if (!lo) throw Error(ErrorCode::NoFeasibleSolution, "no penalty level keeps every constraint inside its band");
  double a = kLogLo, b = kLogHi;
  for (int step = 0; step < 60; ++step) {
    const double mid = 0.5 * (a + b);
    if (auto r = evaluate(mid)) {
      a = mid;
      lo = std::move(r);
    } else {
      b = mid;
    }
  }
  lo->converged = true;
  detail::note_rank(p, *lo);
  return *lo;
}

/// Stationarity and constraint residuals of a chi-squared solution.
template <typename Scalar>
KktDiagnostics kkt_residuals(const CalibrationProblemT<Scalar>& p, const CalibrationResultT<Scalar>& res) {
  KktDiagnostics out;
  if (p.units() == 0) return out;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.units(); ++i) {
    const Scalar expected = Scalar(1) + p.constant(i) * p.aux.row(i).dot(res.multipliers);
    worst = std::max(worst, std::abs(static_cast<double>(res.factors(i) - expected)));
  }
  out.stationarity = worst;
  const detail::Vec<Scalar> new_weights = p.base_weights.cwiseProduct(res.factors);
  out.residuals = (p.aux.transpose() * new_weights - p.targets).template cast<double>();
  return out;
}

}  // namespace tailcal
