#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dcovica/core.hpp"

namespace dcovica {

// Mixing-matrix error D(M0, Mhat) = inf_C ||C Mhat^{-1} M0 - I||_F / sqrt(d-1)
// over C = P B (signed permutation times positive diagonal). With
// G = Mhat^{-1} M0, the optimal signed scale for output row i sourced from
// row r of G is G(r,i)/||G(r,.)||^2 with row cost 1 - G(r,i)^2/||G(r,.)||^2,
// leaving an assignment problem over rows.
template <typename Scalar>
struct ErrorBreakdown {
  Scalar distance = 0;
  std::vector<Index> best_permutation;  // source row of G feeding output row i
  std::vector<Scalar> best_scales;      // signed scales (absorb P signs and B)
};

namespace detail {

// Minimum-cost assignment (Jonker-Volgenant style shortest augmenting
// paths). Returns row_of[j] = row assigned to column j.
template <typename Scalar>
std::vector<Index> solve_assignment(const MatrixX<Scalar>& cost) {
  const Index n = cost.rows();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> u(static_cast<std::size_t>(n + 1), 0), v(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<Scalar> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      Scalar delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_of(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) row_of[static_cast<std::size_t>(j - 1)] = p[static_cast<std::size_t>(j)] - 1;
  return row_of;
}

template <typename Scalar>
void check_nonsingular(const MatrixX<Scalar>& m, const char* name) {
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m);
  const auto& sv = svd.singularValues();
  if (!(sv[sv.size() - 1] > Scalar(0)) || sv[0] / sv[sv.size() - 1] > Scalar(1e12))
    throw invalid_argument_error(std::string("mixing_error: ") + name +
                                 " is singular or too ill-conditioned");
}

}  // namespace detail

template <typename Scalar>
ErrorBreakdown<Scalar> mixing_error(const MatrixX<Scalar>& m0, const MatrixX<Scalar>& m_hat) {
  const Index d = m0.rows();
  require(d >= 2 && m0.cols() == d && m_hat.rows() == d && m_hat.cols() == d,
          "mixing_error: need square matrices of equal dimension >= 2");
  detail::check_nonsingular(m0, "m0");
  detail::check_nonsingular(m_hat, "m_hat");

  const MatrixX<Scalar> g = m_hat.partialPivLu().solve(m0);
  VectorX<Scalar> rownorm2 = g.rowwise().squaredNorm();
  MatrixX<Scalar> cost(d, d);  // cost(r, i): row r of G feeds output row i
  for (Index r = 0; r < d; ++r)
    for (Index i = 0; i < d; ++i) cost(r, i) = Scalar(1) - g(r, i) * g(r, i) / rownorm2[r];

  std::vector<Index> assign;  // assign[i] = source row for output i
  if (d <= 8) {
    std::vector<Index> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), Index(0));
    Scalar best = std::numeric_limits<Scalar>::infinity();
    do {
      Scalar tot = 0;
      for (Index i = 0; i < d; ++i) tot += cost(perm[static_cast<std::size_t>(i)], i);
      if (tot < best) {
        best = tot;
        assign = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    assign = detail::solve_assignment(cost);
  }

  ErrorBreakdown<Scalar> out;
  out.best_permutation = assign;
  out.best_scales.resize(static_cast<std::size_t>(d));
  Scalar total = 0;
  for (Index i = 0; i < d; ++i) {
    const Index r = assign[static_cast<std::size_t>(i)];
    out.best_scales[static_cast<std::size_t>(i)] = g(r, i) / rownorm2[r];
    total += cost(r, i);
  }
  out.distance = std::sqrt(std::max(total, Scalar(0))) / std::sqrt(static_cast<Scalar>(d - 1));
  return out;
}

// Oracle by dense search over signed permutations and a log-grid of
// positive diagonal scales; upper-bounds the closed form within the grid
// resolution. d <= 3 only.
template <typename Scalar>
Scalar mixing_error_brute(const MatrixX<Scalar>& m0, const MatrixX<Scalar>& m_hat,
                          Index grid = 2001) {
  const Index d = m0.rows();
  require(d <= 3, "mixing_error_brute: intended for d <= 3");
  detail::check_nonsingular(m0, "m0");
  detail::check_nonsingular(m_hat, "m_hat");
  const MatrixX<Scalar> g = m_hat.partialPivLu().solve(m0);

  std::vector<Scalar> scales(static_cast<std::size_t>(grid));
  const Scalar lo = std::log(Scalar(1e-3)), hi = std::log(Scalar(1e3));
  for (Index t = 0; t < grid; ++t)
    scales[static_cast<std::size_t>(t)] =
        std::exp(lo + (hi - lo) * static_cast<Scalar>(t) / static_cast<Scalar>(grid - 1));

  std::vector<Index> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), Index(0));
  Scalar best = std::numeric_limits<Scalar>::infinity();
  do {
    // rows are independent given the assignment: scan sign x scale per row
    Scalar tot = 0;
    for (Index i = 0; i < d; ++i) {
      const Index r = perm[static_cast<std::size_t>(i)];
      Scalar row_best = std::numeric_limits<Scalar>::infinity();
      for (const Scalar sgn : {Scalar(-1), Scalar(1)}) {
        for (const Scalar b : scales) {
          const Scalar c = sgn * b;
          Scalar err = 0;
          for (Index j = 0; j < d; ++j) {
            const Scalar e = c * g(r, j) - (j == i ? Scalar(1) : Scalar(0));
            err += e * e;
          }
          row_best = std::min(row_best, err);
        }
      }
      tot += row_best;
    }
    best = std::min(best, tot);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best) / std::sqrt(static_cast<Scalar>(d - 1));
}

}  // namespace dcovica
