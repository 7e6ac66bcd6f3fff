#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dcovica/core.hpp"

namespace dcovica {

// Empirical distance covariance between two equal-length samples, as the
// U-statistic combination I_n = T1 + T2 - T3 over pairwise Euclidean
// distances. T1 averages distance products over pairs, T2 is the product
// of mean distances, T3 averages the six mixed products over triples.
// I_n is unbiased, not nonnegative: small negative values are legitimate.
template <typename Scalar>
struct DcovStat {
  Scalar t1 = 0;
  Scalar t2 = 0;
  Scalar t3 = 0;
  Scalar i_n = 0;  // t1 + t2 - t3
};

template <typename Scalar>
MatrixX<Scalar> pairwise_distances(const MatrixX<Scalar>& x) {
  const Index n = x.rows();
  require(n >= 1, "pairwise_distances: empty input");
  MatrixX<Scalar> d = MatrixX<Scalar>::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const Scalar v = (x.row(i) - x.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

namespace detail {

template <typename Scalar>
void check_dcov_inputs(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y) {
  if (x.rows() != y.rows())
    throw invalid_argument_error("dcov: samples have different lengths (" +
                                 std::to_string(x.rows()) + " vs " + std::to_string(y.rows()) +
                                 ")");
  if (x.rows() < 3)
    throw invalid_argument_error("dcov: need n >= 3 observations, got " +
                                 std::to_string(x.rows()));
}

// T1, T2, T3 from two distance matrices via row sums, O(n^2):
//   T1 = sum_{i!=j} A_ij B_ij / (n(n-1))
//   T2 = a.. b.. / (n(n-1))^2
//   T3 = 2 sum_i (a_i. b_i. - sum_j A_ij B_ij) / (n(n-1)(n-2))
// Equality with the literal pair/triple sums is pinned by tests against
// dcov_brute.
template <typename Scalar>
DcovStat<Scalar> dcov_from_distances(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  const Index n = a.rows();
  const Scalar npairs = static_cast<Scalar>(n) * static_cast<Scalar>(n - 1);
  VectorX<Scalar> arow = a.rowwise().sum();
  VectorX<Scalar> brow = b.rowwise().sum();
  const Scalar ab = a.cwiseProduct(b).sum();
  const Scalar atot = arow.sum();
  const Scalar btot = brow.sum();

  DcovStat<Scalar> s;
  s.t1 = ab / npairs;
  s.t2 = (atot / npairs) * (btot / npairs);
  s.t3 = Scalar(2) * (arow.dot(brow) - ab) / (npairs * static_cast<Scalar>(n - 2));
  s.i_n = s.t1 + s.t2 - s.t3;
  return s;
}

}  // namespace detail

// I_n(col_k, cols k+1..d-1) for k = 0..npairs-1, fused over one pass of
// row pairs with suffix accumulation of the squared column contributions.
// Fixed summation order; never materializes distance matrices.
template <typename Scalar>
std::vector<Scalar> dcov_block_summands(const MatrixX<Scalar>& s, Index npairs) {
  const Index n = s.rows(), cols = s.cols();
  require(n >= 3, "dcov_block_summands: need n >= 3");
  require(npairs >= 1 && npairs <= cols - 1, "dcov_block_summands: bad pair count");

  std::vector<Scalar> sumab(static_cast<std::size_t>(npairs), Scalar(0));
  MatrixX<Scalar> arow = MatrixX<Scalar>::Zero(n, npairs);
  MatrixX<Scalar> brow = MatrixX<Scalar>::Zero(n, npairs);
  std::vector<Scalar> dif(static_cast<std::size_t>(n) * static_cast<std::size_t>(cols));
  std::vector<Scalar> acc(static_cast<std::size_t>(n));

  for (Index i = 0; i + 1 < n; ++i) {
    const Index m = n - 1 - i;
    for (Index l = 0; l < cols; ++l) {
      const Scalar* col = s.col(l).data();
      const Scalar si = col[i];
      Scalar* dl = dif.data() + static_cast<std::size_t>(l) * static_cast<std::size_t>(n);
      for (Index t = 0; t < m; ++t) dl[t] = si - col[i + 1 + t];
    }
    std::fill(acc.begin(), acc.begin() + static_cast<std::size_t>(m), Scalar(0));
    for (Index l = cols - 1; l >= 1; --l) {
      const Scalar* dl = dif.data() + static_cast<std::size_t>(l) * static_cast<std::size_t>(n);
      for (Index t = 0; t < m; ++t) acc[static_cast<std::size_t>(t)] += dl[t] * dl[t];
      const Index k = l - 1;
      if (k >= npairs) continue;
      const Scalar* dk = dif.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n);
      Scalar sab = 0, sa = 0, sb = 0;
      Scalar* ar = arow.col(k).data();
      Scalar* br = brow.col(k).data();
      const bool last = (l == cols - 1);
      for (Index t = 0; t < m; ++t) {
        const Scalar a = std::abs(dk[t]);
        const Scalar b = last ? std::abs(dl[t]) : std::sqrt(acc[static_cast<std::size_t>(t)]);
        sab += a * b;
        sa += a;
        sb += b;
        ar[i + 1 + t] += a;
        br[i + 1 + t] += b;
      }
      sumab[static_cast<std::size_t>(k)] += sab;
      ar[i] += sa;
      br[i] += sb;
    }
  }

  const Scalar npr = static_cast<Scalar>(n) * static_cast<Scalar>(n - 1);
  std::vector<Scalar> stats(static_cast<std::size_t>(npairs));
  for (Index k = 0; k < npairs; ++k) {
    const Scalar ab2 = Scalar(2) * sumab[static_cast<std::size_t>(k)];
    const Scalar atot = arow.col(k).sum();
    const Scalar btot = brow.col(k).sum();
    const Scalar t1 = ab2 / npr;
    const Scalar t2 = (atot / npr) * (btot / npr);
    const Scalar t3 =
        Scalar(2) * (arow.col(k).dot(brow.col(k)) - ab2) / (npr * static_cast<Scalar>(n - 2));
    stats[static_cast<std::size_t>(k)] = t1 + t2 - t3;
  }
  return stats;
}

// O(n^2) evaluation via materialized distance matrices and row sums.
template <typename Scalar>
DcovStat<Scalar> dcov_ustat(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y) {
  detail::check_dcov_inputs(x, y);
  const MatrixX<Scalar> a = pairwise_distances(x);
  const MatrixX<Scalar> b = pairwise_distances(y);
  return detail::dcov_from_distances(a, b);
}

// Literal transcription of the pair/pair/triple sums; the oracle for
// dcov_ustat. O(n^3), intended for n <= 100.
template <typename Scalar>
DcovStat<Scalar> dcov_brute(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y) {
  detail::check_dcov_inputs(x, y);
  const Index n = x.rows();
  const MatrixX<Scalar> a = pairwise_distances(x);
  const MatrixX<Scalar> b = pairwise_distances(y);

  const Scalar c2 = static_cast<Scalar>(n) * static_cast<Scalar>(n - 1) / Scalar(2);
  const Scalar c3 =
      static_cast<Scalar>(n) * static_cast<Scalar>(n - 1) * static_cast<Scalar>(n - 2) / Scalar(6);

  Scalar t1 = 0, sa = 0, sb = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      t1 += a(i, j) * b(i, j);
      sa += a(i, j);
      sb += b(i, j);
    }
  }
  Scalar t3 = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      for (Index k = j + 1; k < n; ++k)
        t3 += (a(i, j) * b(i, k) + a(i, k) * b(i, j) + a(i, j) * b(j, k) + a(j, k) * b(i, j) +
               a(i, k) * b(j, k) + a(j, k) * b(i, k)) /
              Scalar(3);

  DcovStat<Scalar> s;
  s.t1 = t1 / c2;
  s.t2 = (sa / c2) * (sb / c2);
  s.t3 = t3 / c3;
  s.i_n = s.t1 + s.t2 - s.t3;
  return s;
}

}  // namespace dcovica
