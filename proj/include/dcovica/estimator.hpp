#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "dcovica/core.hpp"
#include "dcovica/nelder_mead.hpp"
#include "dcovica/objective.hpp"
#include "dcovica/parallel.hpp"
#include "dcovica/rng.hpp"
#include "dcovica/samples.hpp"

namespace dcovica {

enum class EstimatorKind { dcov, pitdcov };
enum class FitMode { joint, sequential };

struct FitOptions {
  EstimatorKind estimator = EstimatorKind::dcov;
  FitMode mode = FitMode::joint;
  Index n_starts = 1000;       // Latin hypercube initial scan
  double bandwidth_scale = 1;  // PIT bandwidth multiplier
  Index max_iters = 0;         // local optimizer iterations; 0 -> 200 per free angle
  double f_tol = 1e-8;
  std::uint64_t seed = 0;
  Index top_starts = 1;        // locally optimize from the best m scan points
  int threads = 0;             // 0 -> DCOVICA_THREADS or hardware
};

template <typename Scalar>
struct IcaFit {
  VectorX<Scalar> theta;          // canonical angles of the separating rotation
  MatrixX<Scalar> w;              // separating rotation: S = Z W'
  MatrixX<Scalar> uncorrelating;  // O from whitening (identity when fit from Z directly)
  MatrixX<Scalar> mixing;         // M = O^{-1} W'
  MatrixX<Scalar> sources;        // S = Z W'
  Scalar objective = 0;
  Index starts_evaluated = 0;
  bool converged = true;
};

// Latin hypercube over a box: every coordinate's n_points values occupy
// each of n_points equal-width bins exactly once.
template <typename Scalar>
MatrixX<Scalar> latin_hypercube(const VectorX<Scalar>& upper, Index n_points, Rng& rng) {
  require(n_points >= 1, "latin_hypercube: need n_points >= 1");
  const Index p = upper.size();
  MatrixX<Scalar> pts(n_points, p);
  for (Index c = 0; c < p; ++c) {
    const auto bins = rng.permutation(n_points);
    for (Index i = 0; i < n_points; ++i) {
      const double u = rng.uniform01();
      pts(i, c) = static_cast<Scalar>((static_cast<double>(bins[static_cast<std::size_t>(i)]) + u) /
                                      static_cast<double>(n_points)) *
                  upper[c];
    }
  }
  return pts;
}

// Stratified starting angles over the canonical domain; row i is one
// angle vector.
template <typename Scalar>
MatrixX<Scalar> latin_hypercube_init(Index p, Index n_points, std::uint64_t seed) {
  const Index d = dimension_from_angles(p);
  Rng rng(seed, 0x4c485331u);
  return latin_hypercube(angle_upper_bounds<Scalar>(d), n_points, rng);
}

namespace detail {

template <typename Scalar>
void check_whitened(const MatrixX<Scalar>& z) {
  const MatrixX<Scalar> cov = sample_covariance(z);
  const Scalar dev = (cov - MatrixX<Scalar>::Identity(z.cols(), z.cols())).cwiseAbs().maxCoeff();
  require(dev < Scalar(1e-3),
          "fit: input is not whitened (sample covariance deviates from identity by " +
              std::to_string(static_cast<double>(dev)) + ")");
}

// Scan values in parallel, then locally optimize from the best top_starts
// points. Ties break toward the lower index, so results do not depend on
// the thread count.
template <typename Scalar, typename F>
std::pair<NelderMeadResult<Scalar>, bool> multistart(const MatrixX<Scalar>& starts, const F& f,
                                                     const FitOptions& opts, Index max_iters) {
  const Index m = starts.rows();
  std::vector<Scalar> values(static_cast<std::size_t>(m));
  parallel_for(m, opts.threads,
               [&](std::int64_t i) { values[static_cast<std::size_t>(i)] = f(starts.row(i).transpose()); });

  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index(0));
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const Scalar va = values[static_cast<std::size_t>(a)], vb = values[static_cast<std::size_t>(b)];
    return va < vb || (va == vb && a < b);
  });
  const Index n_local = std::min<Index>(std::max<Index>(opts.top_starts, 1), m);

  std::vector<NelderMeadResult<Scalar>> local(static_cast<std::size_t>(n_local));
  parallel_for(n_local, opts.threads, [&](std::int64_t t) {
    const VectorX<Scalar> x0 = starts.row(order[static_cast<std::size_t>(t)]).transpose();
    local[static_cast<std::size_t>(t)] =
        nelder_mead<Scalar>(f, x0, Scalar(0.25), static_cast<Scalar>(opts.f_tol), max_iters);
  });

  std::size_t best = 0;
  for (std::size_t t = 1; t < local.size(); ++t)
    if (local[t].value < local[best].value) best = t;
  // keep the scan winner if the optimizer somehow ended higher
  bool conv = local[best].converged;
  if (values[static_cast<std::size_t>(order[0])] < local[best].value) {
    NelderMeadResult<Scalar> r;
    r.x = starts.row(order[0]).transpose();
    r.value = values[static_cast<std::size_t>(order[0])];
    r.converged = false;
    return {r, false};
  }
  return {local[best], conv};
}

template <typename Scalar>
IcaFit<Scalar> finalize_fit(const IcaObjective<Scalar>& obj, const VectorX<Scalar>& theta_raw,
                            Scalar objective, Index starts, bool converged,
                            const MatrixX<Scalar>* uncorrelating) {
  IcaFit<Scalar> fit;
  fit.w = w_from_theta(theta_raw);
  fit.theta = theta_from_w(fit.w);
  fit.sources = obj.data() * fit.w.transpose();
  fit.objective = objective;
  fit.starts_evaluated = starts;
  fit.converged = converged;
  const Index d = obj.d();
  if (uncorrelating) {
    fit.uncorrelating = *uncorrelating;
    fit.mixing = uncorrelating->partialPivLu().solve(fit.w.transpose());
  } else {
    fit.uncorrelating = MatrixX<Scalar>::Identity(d, d);
    fit.mixing = fit.w.transpose();
  }
  return fit;
}

}  // namespace detail

// Joint estimation: scan the objective over n_starts Latin hypercube
// points, then run the simplex search from the best point(s).
template <typename Scalar>
IcaFit<Scalar> fit_joint(const IcaObjective<Scalar>& obj, const FitOptions& opts,
                         const MatrixX<Scalar>* uncorrelating = nullptr) {
  const Index p = obj.p();
  const MatrixX<Scalar> starts =
      latin_hypercube_init<Scalar>(p, std::max<Index>(opts.n_starts, 1), opts.seed);
  const Index max_iters = opts.max_iters > 0 ? opts.max_iters : 200 * p;

  auto f = [&](const VectorX<Scalar>& theta) -> Scalar {
    return opts.estimator == EstimatorKind::dcov
               ? obj.dcov(theta)
               : obj.pitdcov(theta, static_cast<Scalar>(opts.bandwidth_scale));
  };
  auto [best, converged] = detail::multistart<Scalar>(starts, f, opts, max_iters);
  return detail::finalize_fit(obj, best.x, best.value, starts.rows(), converged, uncorrelating);
}

// Sequential estimation: d-1 nested problems. Stage k minimizes the k-th
// summand over the row-k angles with earlier rows frozen at their
// estimates; later rows do not move the stage objective, and are held at
// zero. The reported objective is the joint value at the assembled angles.
template <typename Scalar>
IcaFit<Scalar> fit_sequential(const IcaObjective<Scalar>& obj, const FitOptions& opts,
                              const MatrixX<Scalar>* uncorrelating = nullptr) {
  const Index d = obj.d();
  const Index p = obj.p();
  VectorX<Scalar> theta = VectorX<Scalar>::Zero(p);
  bool converged = true;
  Index starts_total = 0;

  Index offset = 0;  // storage offset of row k's angles
  for (Index k = 0; k + 1 < d; ++k) {
    const Index nk = d - 1 - k;
    VectorX<Scalar> upper(nk);
    for (Index j = 0; j < nk; ++j)
      upper[j] = (k == 0) ? Scalar(2) * std::numbers::pi_v<Scalar> : std::numbers::pi_v<Scalar>;
    Rng rng(opts.seed, 0x53455121u, static_cast<std::uint64_t>(k));
    // scan budget proportional to the stage's share of the angles
    const Index stage_starts =
        std::max<Index>(std::min<Index>(opts.n_starts, 100),
                        (std::max<Index>(opts.n_starts, 1) * nk + p - 1) / p);
    const MatrixX<Scalar> starts = latin_hypercube(upper, stage_starts, rng);
    const Index max_iters = opts.max_iters > 0 ? opts.max_iters : 200 * nk;

    auto f = [&, k](const VectorX<Scalar>& stage_angles) -> Scalar {
      VectorX<Scalar> th = theta;
      th.segment(offset, nk) = stage_angles;
      return opts.estimator == EstimatorKind::dcov
                 ? obj.dcov_stage(th, k)
                 : obj.pitdcov_stage(th, k, static_cast<Scalar>(opts.bandwidth_scale));
    };
    auto [best, conv] = detail::multistart<Scalar>(starts, f, opts, max_iters);
    theta.segment(offset, nk) = best.x;
    converged = converged && conv;
    starts_total += starts.rows();
    offset += nk;
  }

  const Scalar joint_value = opts.estimator == EstimatorKind::dcov
                                 ? obj.dcov(theta)
                                 : obj.pitdcov(theta, static_cast<Scalar>(opts.bandwidth_scale));
  return detail::finalize_fit(obj, theta, joint_value, starts_total, converged, uncorrelating);
}

// Fit from whitened data (sample covariance = identity).
template <typename Scalar>
IcaFit<Scalar> fit_whitened(const MatrixX<Scalar>& z, const FitOptions& opts,
                            const MatrixX<Scalar>* uncorrelating = nullptr) {
  detail::check_whitened(z);
  IcaObjective<Scalar> obj(z);
  return opts.mode == FitMode::joint ? fit_joint(obj, opts, uncorrelating)
                                     : fit_sequential(obj, opts, uncorrelating);
}

// Full pipeline from raw observations: center, optionally standardize
// columns, whiten, fit. The mixing matrix maps sources back to the
// (standardized) centered observations.
template <typename Scalar>
IcaFit<Scalar> fit_pipeline(const MatrixX<Scalar>& y, const FitOptions& opts,
                            bool standardize = false) {
  require(y.cols() >= 2, "fit: need at least 2 columns");
  require(y.rows() >= 3, "fit: need at least 3 observations");
  MatrixX<Scalar> x = center(y).first;
  if (standardize) x = standardize_columns(x).first;
  auto [z, wh] = whiten(x);
  IcaObjective<Scalar> obj(std::move(z));
  IcaFit<Scalar> fit = opts.mode == FitMode::joint
                           ? fit_joint(obj, opts, &wh.uncorrelating)
                           : fit_sequential(obj, opts, &wh.uncorrelating);
  return fit;
}

}  // namespace dcovica
