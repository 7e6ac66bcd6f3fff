#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dcovica/core.hpp"
#include "dcovica/dcov.hpp"
#include "dcovica/estimator.hpp"
#include "dcovica/metrics.hpp"
#include "dcovica/parallel.hpp"
#include "dcovica/pit.hpp"
#include "dcovica/rng.hpp"

namespace dcovica {

template <typename Scalar>
struct TestResult {
  Scalar statistic = 0;
  Scalar p_value = 1;
  Index n_replicates = 0;
  std::vector<Scalar> replicate_stats;
  std::uint64_t seed = 0;
  Index n_dropped = 0;  // resampling replicates lost to failed refits
};

namespace detail {

// add-one permutation p-value: guarantees p > 0 and a valid test level
template <typename Scalar>
Scalar add_one_p_value(Scalar observed, const std::vector<Scalar>& replicates) {
  std::size_t count = 0;
  for (const Scalar r : replicates)
    if (r >= observed) ++count;
  return static_cast<Scalar>(count + 1) / static_cast<Scalar>(replicates.size() + 1);
}

}  // namespace detail

// Mutual-independence statistic: n times the summed distance covariance
// between each ranked column and the ranked block of later columns.
template <typename Scalar>
Scalar mutual_independence_stat(const MatrixX<Scalar>& s) {
  require(s.rows() >= 3 && s.cols() >= 2, "mutual_independence_stat: need n >= 3, d >= 2");
  const MatrixX<Scalar> u = rank_transform(s);
  const auto sums = dcov_block_summands(u, s.cols() - 1);
  Scalar total = 0;
  for (const Scalar v : sums) total += v;
  return static_cast<Scalar>(s.rows()) * total;
}

// Permutation test of mutual independence: every replicate permutes each
// column independently (destroying all cross-column dependence) and
// recomputes the statistic. Large values reject.
template <typename Scalar>
TestResult<Scalar> permutation_test_mutual(const MatrixX<Scalar>& s, Index n_perm,
                                           std::uint64_t seed, int threads = 0) {
  require(n_perm >= 1, "permutation_test_mutual: need n_perm >= 1");
  const Index n = s.rows(), d = s.cols();
  TestResult<Scalar> res;
  res.seed = seed;
  res.statistic = mutual_independence_stat(s);
  // permuting a column permutes its ranks identically, so replicates can
  // shuffle the ranked matrix directly
  const MatrixX<Scalar> u = rank_transform(s);
  res.replicate_stats.resize(static_cast<std::size_t>(n_perm));
  parallel_for(n_perm, threads, [&](std::int64_t r) {
    Rng rng(seed, 0x6d757475u, static_cast<std::uint64_t>(r));
    MatrixX<Scalar> up(n, d);
    for (Index k = 0; k < d; ++k) {
      const auto perm = rng.permutation(n);
      for (Index i = 0; i < n; ++i) up(i, k) = u(perm[static_cast<std::size_t>(i)], k);
    }
    const auto sums = dcov_block_summands(up, d - 1);
    Scalar total = 0;
    for (const Scalar v : sums) total += v;
    res.replicate_stats[static_cast<std::size_t>(r)] = static_cast<Scalar>(n) * total;
  });
  res.n_replicates = n_perm;
  res.p_value = detail::add_one_p_value(res.statistic, res.replicate_stats);
  return res;
}

// Uniformly random permutation matrix with iid +-1 row signs.
template <typename Scalar>
MatrixX<Scalar> random_signed_permutation(Index d, Rng& rng) {
  require(d >= 1, "random_signed_permutation: need d >= 1");
  MatrixX<Scalar> p = MatrixX<Scalar>::Zero(d, d);
  const auto perm = rng.permutation(d);
  for (Index i = 0; i < d; ++i)
    p(i, perm[static_cast<std::size_t>(i)]) = rng.coin() ? Scalar(1) : Scalar(-1);
  return p;
}

template <typename Scalar>
MatrixX<Scalar> random_signed_permutation(Index d, std::uint64_t seed) {
  Rng rng(seed, 0x73676e70u);
  return random_signed_permutation<Scalar>(d, rng);
}

template <typename Scalar>
struct ResampleDraw {
  Scalar u_stat = 0;       // U_n of the re-estimated ICs (signed-permuted)
  Scalar mixing_dist = 0;  // D(M*, M_hat)
  bool ok = false;
};

// Resampling core shared by the existence test and the confidence radius:
// permute each estimated source column, rebuild observations through the
// fitted mixing matrix, re-estimate with the identical procedure, and
// record both the independence statistic of the re-estimated ICs and the
// mixing-matrix distance.
template <typename Scalar>
std::vector<ResampleDraw<Scalar>> resample_draws(const IcaFit<Scalar>& fit,
                                                 const FitOptions& opts, Index n_resamples,
                                                 std::uint64_t seed, Index inner_starts,
                                                 bool signed_perm, bool standardize,
                                                 int threads) {
  const Index n = fit.sources.rows(), d = fit.sources.cols();
  std::vector<ResampleDraw<Scalar>> draws(static_cast<std::size_t>(n_resamples));
  parallel_for(n_resamples, threads, [&](std::int64_t r) {
    Rng rng(seed, 0x72736d70u, static_cast<std::uint64_t>(r));
    MatrixX<Scalar> s_star(n, d);
    for (Index k = 0; k < d; ++k) {
      const auto perm = rng.permutation(n);
      for (Index i = 0; i < n; ++i)
        s_star(i, k) = fit.sources(perm[static_cast<std::size_t>(i)], k);
    }
    const MatrixX<Scalar> y_star = s_star * fit.mixing.transpose();
    const MatrixX<Scalar> p_star = signed_perm ? random_signed_permutation<Scalar>(d, rng)
                                               : MatrixX<Scalar>::Identity(d, d);
    FitOptions inner = opts;
    inner.n_starts = inner_starts;
    inner.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    inner.threads = 1;  // replicates already run in parallel
    ResampleDraw<Scalar> draw;
    try {
      const IcaFit<Scalar> refit = fit_pipeline(y_star, inner, standardize);
      if (refit.converged) {
        draw.u_stat = mutual_independence_stat<Scalar>((refit.sources * p_star).eval());
        draw.mixing_dist = mixing_error<Scalar>(refit.mixing, fit.mixing).distance;
        draw.ok = true;
      }
    } catch (const std::exception&) {
      draw.ok = false;
    }
    draws[static_cast<std::size_t>(r)] = draw;
  });
  return draws;
}

// Resampling test for the existence of independent components. Large
// observed statistics relative to the resampled null reject existence.
// Replicates whose refit fails to converge are dropped and counted.
template <typename Scalar>
TestResult<Scalar> existence_test(const IcaFit<Scalar>& fit, const FitOptions& opts,
                                  Index n_resamples, std::uint64_t seed,
                                  Index inner_starts = 100, bool signed_perm = true,
                                  bool standardize = false, int threads = 0) {
  require(n_resamples >= 1, "existence_test: need n_resamples >= 1");
  const auto draws = resample_draws(fit, opts, n_resamples, seed, inner_starts, signed_perm,
                                    standardize, threads);
  TestResult<Scalar> res;
  res.seed = seed;
  res.statistic = mutual_independence_stat(fit.sources);
  for (const auto& d : draws) {
    if (d.ok)
      res.replicate_stats.push_back(d.u_stat);
    else
      ++res.n_dropped;
  }
  require(!res.replicate_stats.empty(), "existence_test: every resampling refit failed");
  res.n_replicates = static_cast<Index>(res.replicate_stats.size());
  res.p_value = detail::add_one_p_value(res.statistic, res.replicate_stats);
  return res;
}

// Radius of the resampling confidence set for the mixing matrix:
// the (N*alpha)-th largest of D(M*, M_hat) over N replicates.
template <typename Scalar>
Scalar confidence_radius(const IcaFit<Scalar>& fit, const FitOptions& opts, Index n_resamples,
                         Scalar alpha, std::uint64_t seed, Index inner_starts = 100,
                         bool signed_perm = true, bool standardize = false, int threads = 0) {
  require(n_resamples >= 1, "confidence_radius: need n_resamples >= 1");
  require(alpha > Scalar(0) && alpha <= Scalar(1), "confidence_radius: alpha in (0, 1]");
  const auto draws = resample_draws(fit, opts, n_resamples, seed, inner_starts, signed_perm,
                                    standardize, threads);
  std::vector<Scalar> dist;
  for (const auto& d : draws)
    if (d.ok) dist.push_back(d.mixing_dist);
  require(!dist.empty(), "confidence_radius: every resampling refit failed");
  std::sort(dist.begin(), dist.end(), std::greater<Scalar>());
  const auto n = static_cast<Scalar>(dist.size());
  Index k = static_cast<Index>(std::floor(static_cast<double>(n * alpha) + 1e-12));
  k = std::max<Index>(1, std::min<Index>(k, static_cast<Index>(dist.size())));
  return dist[static_cast<std::size_t>(k - 1)];
}

// Joint m-lag serial-dependence statistic:
// (n-m) I_n between the ranked current rows and the ranked lag-1..m rows.
template <typename Scalar>
Scalar serial_stat(const MatrixX<Scalar>& u_ranked, Index m) {
  const Index n = u_ranked.rows(), d = u_ranked.cols();
  const Index rows = n - m;
  MatrixX<Scalar> cur = u_ranked.bottomRows(rows);
  MatrixX<Scalar> lags(rows, d * m);
  for (Index lag = 1; lag <= m; ++lag)
    lags.middleCols((lag - 1) * d, d) = u_ranked.middleRows(m - lag, rows);
  return static_cast<Scalar>(rows) * dcov_ustat(cur, lags).i_n;
}

// Permutation test of serial dependence up to lag m. Null replicates
// permute whole time rows, preserving the cross-sectional law while
// destroying serial structure.
template <typename Scalar>
TestResult<Scalar> serial_test(const MatrixX<Scalar>& y, Index m, Index n_perm,
                               std::uint64_t seed, int threads = 0) {
  const Index n = y.rows();
  require(m >= 1, "serial_test: need m >= 1");
  require(n > m + 2, "serial_test: need n > m + 2");
  require(n_perm >= 1, "serial_test: need n_perm >= 1");

  const MatrixX<Scalar> u = rank_transform(y);
  TestResult<Scalar> res;
  res.seed = seed;
  res.statistic = serial_stat(u, m);
  res.replicate_stats.resize(static_cast<std::size_t>(n_perm));
  parallel_for(n_perm, threads, [&](std::int64_t r) {
    Rng rng(seed, 0x73657269u, static_cast<std::uint64_t>(r));
    const auto perm = rng.permutation(n);
    MatrixX<Scalar> up(n, y.cols());
    for (Index i = 0; i < n; ++i) up.row(i) = u.row(perm[static_cast<std::size_t>(i)]);
    res.replicate_stats[static_cast<std::size_t>(r)] = serial_stat(up, m);
  });
  res.n_replicates = n_perm;
  res.p_value = detail::add_one_p_value(res.statistic, res.replicate_stats);
  return res;
}

}  // namespace dcovica
